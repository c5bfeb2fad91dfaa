"""Command-line interface.

Subcommands: ingest, sample fire, sample walks, embed graph, embed docs,
features build, clf train, clf eval, project, synth, pipeline, bench walks.
Exit code 0 on success; nonzero with a stage-tagged message otherwise.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import classify as clf
from . import docembed, features, pipeline, projection, sampling, sgns, synth
from .graph import (
    NodeRef,
    NodeType,
    build_graph,
    ingest_submission_records,
    load_snapshot,
    project_author_degrees,
    read_records,
    save_snapshot,
    subgraph,
)
from .util import derive_seed, fmt_float


def _cmd_ingest(args) -> int:
    ingest = ingest_submission_records(read_records(args.records))
    graph = build_graph(ingest.edges)
    save_snapshot(graph, args.graph_out)
    if args.docs_out:
        docembed.write_doc_records(ingest.documents, args.docs_out)
    stats = project_author_degrees(graph)
    print(f"nodes {graph.n_nodes} edges {graph.edge_count} skipped {ingest.skipped}")
    print(
        f"documents {len(ingest.documents)} "
        f"author_degree_mean {stats.mean:.4f} std {stats.std_dev:.4f}"
    )
    return 0


def _read_seed_tokens(path: str) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        return tuple(NodeRef.from_token(tok) for line in fh for tok in line.split())


def _cmd_sample_fire(args) -> int:
    graph = load_snapshot(args.graph)
    cfg = sampling.ForestFireConfig(
        burn_prob=args.burn_prob,
        target_size=args.target_size,
        seed_nodes=_read_seed_tokens(args.seeds_file),
        max_restarts=args.max_restarts,
        rng_seed=args.seed,
    )
    burned = sampling.forest_fire_sample(graph, cfg)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for ref in sorted(burned):
            fh.write(ref.token() + "\n")
    if args.subgraph_out:
        save_snapshot(subgraph(graph, burned), args.subgraph_out)
    print(f"burned {len(burned)} nodes")
    return 0


def _cmd_sample_walks(args) -> int:
    graph = load_snapshot(args.graph)
    schema = sampling.MetapathSchema.parse(args.schema)
    cfg = sampling.WalkConfig(
        walks_per_start=args.walks,
        walk_length=args.length,
        min_emit_length=args.min_emit,
        rng_seed=args.seed,
        workers=args.workers,
    )
    stats = sampling.metapath_walks(graph, schema, cfg, args.out)
    print(
        f"emitted {stats.emitted} truncated {stats.truncated} "
        f"dropped {stats.dropped} steps {stats.steps}"
    )
    return 0


def _cmd_embed_graph(args) -> int:
    cfg = sgns.SgnsConfig(
        dimension=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
        min_count=args.min_count,
        mode={"mp2v": "mp2v", "mp2vpp": "mp2v_pp"}[args.mode],
        rng_seed=args.seed,
        workers=args.workers,
    )
    result = sgns.train_skipgram(args.corpus, cfg)
    sgns.save_embeddings(result.embedding, result.vocab, args.out)
    first = result.epoch_losses[0] if result.epoch_losses else float("nan")
    last = result.epoch_losses[-1] if result.epoch_losses else float("nan")
    print(f"vocab {len(result.vocab)} pairs {result.total_pairs} loss {first:.4f} -> {last:.4f}")
    return 0


def _cmd_embed_docs(args) -> int:
    records = docembed.read_doc_records(args.docs)
    docs, excluded = docembed.tag_documents(records)
    cfg = docembed.DocConfig(
        dimension=args.dim,
        window=args.window,
        negatives=args.negatives,
        min_count=args.min_count,
        epochs=args.epochs,
        infer_epochs=args.infer_epochs,
        rng_seed=args.seed,
    )
    train = docembed.train_dbow if args.variant == "dbow" else docembed.train_dmm
    model = train(docs, cfg)
    docembed.save_doc_model(model, args.out)
    print(
        f"variant {args.variant} docs {len(docs)} excluded {excluded} "
        f"vocab {len(model.word_vocab)} tags {len(model.tag_names)}"
    )
    return 0


def _cmd_features_build(args) -> int:
    emb, vocab = sgns.load_embeddings(args.graph_emb)
    labels = synth.read_labels(args.labels)
    dbow = docembed.load_doc_model(args.dbow)
    dmm = docembed.load_doc_model(args.dmm)
    records = docembed.read_doc_records(args.docs)
    docs, _ = docembed.tag_documents(records)
    docs_by_author: dict[str, list] = {}
    for doc in docs:
        author = doc.tags[1].partition(":")[2]
        docs_by_author.setdefault(author, []).append(list(doc.tokens))
    profiles = {}
    for author in sorted(docs_by_author):
        prof = features.author_target_similarity(
            dbow, dmm, author, docs_by_author[author], args.target,
            seed=derive_seed(args.seed, "profiles", author),
            infer_epochs=args.infer_epochs,
        )
        if prof is not None:
            profiles[author] = prof
    graph_vectors = {
        author: emb.input_vectors[vocab.id_of(f"a:{author}")]
        for author in labels
        if f"a:{author}" in vocab
    }
    authors = sorted(a for a in labels if a in graph_vectors and a in profiles)
    mode = {"graph": "graph_only", "text": "text_only", "integrated": "integrated"}[args.mode]
    rows, dropped = features.build_feature_table(
        authors, labels, graph_vectors, profiles, mode, args.use_stds
    )
    features.write_feature_csv(rows, args.out)
    if args.profiles_out:
        features.write_profile_csv(
            [profiles[a] for a in sorted(profiles)], args.profiles_out
        )
    print(f"rows {len(rows)} dropped {dropped + len(labels) - len(authors)}")
    return 0


def _cmd_clf_train(args) -> int:
    rows = features.read_feature_csv(args.features)
    pos = [r for r in rows if r.label == 1]
    neg = [r for r in rows if r.label == 0]
    balanced = clf.balanced_subsample(pos, neg, args.ratio, derive_seed(args.seed, "balance"))
    model = clf.train_logreg(
        balanced, lr=args.lr, l2=args.l2, max_iters=args.max_iters, tol=args.tol, seed=args.seed
    )
    clf.save_model(model, args.out)
    _, preds = clf.predict(model, balanced)
    cm = clf.evaluate(preds, [r.label for r in balanced])
    print(f"train_rows {len(balanced)} iterations {model.iterations} train_accuracy {cm.accuracy:.4f}")
    return 0


def _cmd_clf_eval(args) -> int:
    model = clf.load_model(args.model)
    rows = features.read_feature_csv(args.features)
    _, preds = clf.predict(model, rows)
    cm = clf.evaluate(preds, [r.label for r in rows])
    report = clf.metrics_report(cm)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report)
    print(report, end="")
    return 0


def _cmd_project(args) -> int:
    emb, vocab = sgns.load_embeddings(args.emb)
    if args.tokens_file:
        with open(args.tokens_file, "r", encoding="utf-8") as fh:
            tokens = [tok for line in fh for tok in line.split()]
    elif args.type:
        prefix = args.type + ":"
        tokens = sorted(t for t in vocab.tokens if t.startswith(prefix))
    else:
        tokens = list(vocab.tokens)
    proj = projection.pca_project_2d(emb, vocab, tokens)
    projection.write_projection_csv(proj, args.out)
    print(f"projected {len(tokens)} tokens{' (rank deficient)' if proj.rank_deficient else ''}")
    return 0


def _cmd_synth(args) -> int:
    overrides = {
        "n_communities": args.communities,
        "subreddits_per_community": args.subreddits,
        "authors_per_community": args.authors,
        "submissions_per_author": args.submissions,
        "p_in": args.p_in,
        "text_noise": args.text_noise,
        "label_rule": args.label_rule,
        "rng_seed": args.seed,
    }
    cfg = synth.SynthConfig(**{k: v for k, v in overrides.items() if v is not None})
    dataset = synth.synth_generate(cfg, args.out_dir)
    print(
        f"authors {dataset.n_authors} submissions {dataset.n_submissions} "
        f"positive {dataset.n_positive}"
    )
    print(f"records {dataset.records_path}")
    print(f"labels {dataset.labels_path}")
    return 0


def _cmd_pipeline(args) -> int:
    overrides = pipeline.read_config(args.config) if args.config else {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    result = pipeline.run_pipeline(overrides, args.out_dir)
    print(f"stages run: {', '.join(result.stages_run) or '-'}")
    print(f"stages skipped: {', '.join(result.stages_skipped) or '-'}")
    for mode in features.MODES:
        if mode in result.metrics:
            print(f"{mode} accuracy {result.metrics[mode]['accuracy']:.4f}")
    if "baseline" in result.metrics:
        print(f"majority baseline {result.metrics['baseline']:.4f}")
    print(f"report: {result.report_path}")
    return 0


def _cmd_bench_walks(args) -> int:
    graph = load_snapshot(args.graph)
    schema = sampling.MetapathSchema.parse(args.schema)
    cfg = sampling.WalkConfig(
        walks_per_start=args.walks, walk_length=args.length, rng_seed=args.seed
    )
    bench = sampling.benchmark_walks(graph, schema, cfg)
    report = bench.report()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report)
    print(report, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetvec",
        description="Heterogeneous-graph and document embeddings with a fused classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a graph snapshot from submission records")
    p.add_argument("--records", required=True)
    p.add_argument("--graph-out", required=True)
    p.add_argument("--docs-out", default=None)
    p.set_defaults(fn=_cmd_ingest)

    sample = sub.add_parser("sample", help="forest-fire sampling and metapath walks")
    ssub = sample.add_subparsers(dest="subcommand", required=True)
    p = ssub.add_parser("fire", help="forest-fire node sampling")
    p.add_argument("--graph", required=True)
    p.add_argument("--burn-prob", type=float, required=True)
    p.add_argument("--target-size", type=int, required=True)
    p.add_argument("--seeds-file", required=True)
    p.add_argument("--max-restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--subgraph-out", default=None)
    p.set_defaults(fn=_cmd_sample_fire)
    p = ssub.add_parser("walks", help="metapath-biased random walks to disk")
    p.add_argument("--graph", required=True)
    p.add_argument("--schema", default="r,s,a,s,r")
    p.add_argument("--walks", type=int, default=1000)
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--min-emit", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_sample_walks)

    embed = sub.add_parser("embed", help="train graph or document embeddings")
    esub = embed.add_subparsers(dest="subcommand", required=True)
    p = esub.add_parser("graph", help="skip-gram over a walk corpus")
    p.add_argument("--in", dest="corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("mp2v", "mp2vpp"), default="mp2v")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_embed_graph)
    p = esub.add_parser("docs", help="paragraph vectors over tagged documents")
    p.add_argument("--in", dest="docs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=("dbow", "dmm"), required=True)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--infer-epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_embed_docs)

    feats = sub.add_parser("features", help="assemble classifier feature tables")
    fsub = feats.add_subparsers(dest="subcommand", required=True)
    p = fsub.add_parser("build", help="build one feature table")
    p.add_argument("--mode", choices=("graph", "text", "integrated"), required=True)
    p.add_argument("--target", required=True, help="target subreddit token, e.g. r:name")
    p.add_argument("--graph-emb", required=True)
    p.add_argument("--dbow", required=True)
    p.add_argument("--dmm", required=True)
    p.add_argument("--docs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--use-stds", action="store_true")
    p.add_argument("--infer-epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--profiles-out", default=None)
    p.set_defaults(fn=_cmd_features_build)

    c = sub.add_parser("clf", help="train and evaluate the classifier")
    csub = c.add_subparsers(dest="subcommand", required=True)
    p = csub.add_parser("train")
    p.add_argument("--features", required=True)
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_clf_train)
    p = csub.add_parser("eval")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_clf_eval)

    p = sub.add_parser("project", help="2-D principal-axes projection export")
    p.add_argument("--emb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tokens-file", default=None)
    p.add_argument("--type", choices=("a", "s", "c", "r"), default=None)
    p.set_defaults(fn=_cmd_project)

    p = sub.add_parser("synth", help="generate a planted-structure dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--communities", type=int, default=None)
    p.add_argument("--subreddits", type=int, default=None)
    p.add_argument("--authors", type=int, default=None)
    p.add_argument("--submissions", type=int, default=None)
    p.add_argument("--p-in", type=float, default=None)
    p.add_argument("--text-noise", type=float, default=None)
    p.add_argument("--label-rule", choices=synth.LABEL_RULES, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("pipeline", help="run the full pipeline from a config file")
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_pipeline)

    bench = sub.add_parser("bench", help="throughput benchmarks")
    bsub = bench.add_subparsers(dest="subcommand", required=True)
    p = bsub.add_parser("walks", help="walk stepping throughput")
    p.add_argument("--graph", required=True)
    p.add_argument("--schema", default="r,s,a,s,r")
    p.add_argument("--walks", type=int, default=10)
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bench_walks)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    stage = args.command + (f" {args.subcommand}" if getattr(args, "subcommand", None) else "")
    try:
        return args.fn(args)
    except Exception as exc:  # single choke point for stage-tagged errors
        print(f"hetvec {stage}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
