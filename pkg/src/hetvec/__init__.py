"""Heterogeneous-graph + document embeddings with a fused rare-event classifier.

Pipeline: ingest typed interaction records, optionally subsample with
forest fire, generate metapath-biased walks, train skip-gram graph
embeddings and paragraph-vector document embeddings, extract similarity
features, and train/evaluate logistic-regression classifiers in three
feature modes (graph only, text only, integrated).
"""

__version__ = "0.1.0"
