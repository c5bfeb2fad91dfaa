import json

import numpy as np
import pytest

from hetvec.docembed import read_doc_records
from hetvec.errors import ConfigError
from hetvec.graph import NodeType, build_graph, ingest_submission_records, read_records
from hetvec.synth import (
    SynthConfig,
    read_label_table,
    read_labels,
    subreddit_community,
    synth_generate,
    target_subreddit,
)


def small_cfg(**kw):
    base = dict(
        n_communities=3,
        subreddits_per_community=3,
        authors_per_community=20,
        submissions_per_author=4,
        p_in=0.85,
        text_noise=0.25,
        topic_vocab_size=15,
        shared_vocab_size=20,
        words_per_doc=10,
        rng_seed=5,
    )
    base.update(kw)
    return SynthConfig(**base)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            small_cfg(p_in=1.5)
        with pytest.raises(ConfigError):
            small_cfg(target_community=3)
        with pytest.raises(ConfigError):
            small_cfg(label_rule="bogus")

    def test_words_per_doc_infeasible(self):
        with pytest.raises(ConfigError, match="words_per_doc"):
            small_cfg(topic_vocab_size=3, shared_vocab_size=2, words_per_doc=10)

    def test_binary_topic_structure(self):
        assert small_cfg(n_communities=1).n_topics == 2
        assert small_cfg(n_communities=5).n_topics == 2
        cfg = small_cfg(target_community=1)
        assert cfg.community_topic(1) == 0
        assert cfg.community_topic(0) == 1 and cfg.community_topic(2) == 1


class TestGenerate:
    def test_deterministic_bytes(self, tmp_path):
        d1 = synth_generate(small_cfg(), tmp_path / "a")
        d2 = synth_generate(small_cfg(), tmp_path / "b")
        assert d1.records_path.read_bytes() == d2.records_path.read_bytes()
        assert d1.labels_path.read_bytes() == d2.labels_path.read_bytes()

    def test_counts_and_schema(self, tmp_path):
        cfg = small_cfg()
        ds = synth_generate(cfg, tmp_path)
        assert ds.n_authors == 60 and ds.n_submissions == 240
        recs = list(read_records(ds.records_path))
        assert len(recs) == 240
        ing = ingest_submission_records(recs)
        g = build_graph(ing.edges)
        assert len(g.nodes_of_type(NodeType.AUTHOR)) == 60
        assert len(g.nodes_of_type(NodeType.SUBREDDIT)) <= 9
        assert len(ing.documents) == 240

    def test_noiseless_limit_labels_equal_community(self, tmp_path):
        cfg = small_cfg(p_in=1.0, text_noise=0.0)
        ds = synth_generate(cfg, tmp_path)
        table = read_label_table(ds.labels_path)
        for author, label, ci, k in table:
            assert label == int(ci == 0)
            assert k == (4 if ci == 0 else 0)
        # p_in = 1: every submission stays in its own community
        for rec in read_records(ds.records_path):
            assert subreddit_community(rec["subreddit"]) == int(rec["author"][1])

    def test_label_rules(self, tmp_path):
        for rule, check in (
            ("graph_only", lambda ci, k, m: int(ci == 0)),
            ("text_only", lambda ci, k, m: int(k * 2 > m)),
            ("graph_and_text", lambda ci, k, m: int(ci == 0 and k * 2 > m)),
        ):
            ds = synth_generate(small_cfg(label_rule=rule), tmp_path / rule)
            for author, label, ci, k in read_label_table(ds.labels_path):
                assert label == check(ci, k, 4), (rule, author)

    def test_single_community_has_text_signal(self, tmp_path):
        ds = synth_generate(small_cfg(n_communities=1, text_noise=0.4), tmp_path)
        labels = read_labels(ds.labels_path)
        values = set(labels.values())
        assert values == {0, 1}  # the shadow topic creates both classes

    def test_target_subreddit_name(self):
        assert target_subreddit(small_cfg()) == "c0_s0"
        assert subreddit_community("c2_s7") == 2

    def test_doc_words_within_pools(self, tmp_path):
        ds = synth_generate(small_cfg(), tmp_path)
        for rec in read_doc_records(ds.records_path.parent / "records.jsonl"):
            words = rec.text.split()
            assert len(words) == 10
            topics = {w.split("_")[0] for w in words if w.startswith("t")}
            assert len(topics) <= 1  # one topic per document plus shared words
