"""Synthetic planted-structure dataset generator.

Authors live in communities; each submission lands in an own-community
subreddit with probability p_in, and its text comes from the author's
community topic vocabulary (mixed with shared vocabulary) unless flipped
to the other topic with probability text_noise. Two topic vocabularies
exist: the target community's own topic and one topic shared by every
other community, so non-target authors whose documents flip toward the
target topic are text lookalikes that only the graph can resolve, while
target-community authors with mostly-flipped documents fool the graph.
Labels mark authors who are both in the target community and write mostly
target-topic documents; the graph and text signals are therefore each
partially informative and their combination dominates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

LABEL_RULES = ("graph_and_text", "graph_only", "text_only")


@dataclass(frozen=True)
class SynthConfig:
    n_communities: int = 3
    subreddits_per_community: int = 10
    authors_per_community: int = 200
    submissions_per_author: int = 4
    p_in: float = 0.85
    target_community: int = 0
    topic_vocab_size: int = 60
    shared_vocab_size: int = 140
    words_per_doc: int = 30
    text_noise: float = 0.25
    label_rule: str = "graph_and_text"
    rng_seed: int = 0

    def __post_init__(self):
        if min(
            self.n_communities,
            self.subreddits_per_community,
            self.authors_per_community,
            self.submissions_per_author,
            self.topic_vocab_size,
            self.words_per_doc,
        ) < 1:
            raise ConfigError("all synthetic counts must be >= 1")
        if self.shared_vocab_size < 0:
            raise ConfigError("shared_vocab_size must be >= 0")
        if not (0.0 <= self.p_in <= 1.0 and 0.0 <= self.text_noise <= 1.0):
            raise ConfigError("p_in and text_noise must be probabilities")
        if not 0 <= self.target_community < self.n_communities:
            raise ConfigError("target_community must index a community")
        if self.label_rule not in LABEL_RULES:
            raise ConfigError(f"label_rule must be one of {LABEL_RULES}")
        # documents draw words without replacement from topic + shared pools
        if self.words_per_doc > self.topic_vocab_size + self.shared_vocab_size:
            raise ConfigError(
                "words_per_doc exceeds the per-document vocabulary "
                f"({self.topic_vocab_size} topic + {self.shared_vocab_size} shared)"
            )

    @property
    def n_topics(self) -> int:
        # topic 0 = target community's vocabulary, topic 1 = everyone else's
        return 2

    def community_topic(self, ci: int) -> int:
        return 0 if ci == self.target_community else 1


@dataclass(frozen=True)
class SynthDataset:
    records_path: Path
    labels_path: Path
    n_authors: int
    n_submissions: int
    n_positive: int


def _author_name(ci: int, ai: int) -> str:
    return f"c{ci}_a{ai:04d}"


def subreddit_name(ci: int, si: int) -> str:
    return f"c{ci}_s{si}"


def target_subreddit(cfg: SynthConfig) -> str:
    """The designated query subreddit: the first one of the target community."""
    return subreddit_name(cfg.target_community, 0)


def subreddit_community(name: str) -> int:
    """Recover the planted community from a generated subreddit name."""
    return int(name.split("_")[0][1:])


def synth_generate(cfg: SynthConfig, out_dir: str | Path) -> SynthDataset:
    """Write records.jsonl (submission form) and labels.csv under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))

    topic_words = [
        [f"t{t}_w{k}" for k in range(cfg.topic_vocab_size)] for t in range(cfg.n_topics)
    ]
    shared_words = [f"sh_w{k}" for k in range(cfg.shared_vocab_size)]

    records_path = out_dir / "records.jsonl"
    labels_path = out_dir / "labels.csv"
    n_submissions = 0
    label_rows = []
    n_positive = 0

    with open(records_path, "w", encoding="utf-8", newline="\n") as fh:
        for ci in range(cfg.n_communities):
            for ai in range(cfg.authors_per_community):
                author = _author_name(ci, ai)
                target_topic_docs = 0
                for _ in range(cfg.submissions_per_author):
                    sid = f"p{n_submissions:06d}"
                    n_submissions += 1
                    # graph side: own-community subreddit with probability p_in
                    if cfg.n_communities == 1 or rng.random() < cfg.p_in:
                        sub_ci = ci
                    else:
                        others = [c for c in range(cfg.n_communities) if c != ci]
                        sub_ci = others[rng.integers(len(others))]
                    sub = subreddit_name(sub_ci, int(rng.integers(cfg.subreddits_per_community)))
                    # text side: community topic, flipped with probability text_noise
                    topic = cfg.community_topic(ci)
                    if cfg.text_noise > 0.0 and rng.random() < cfg.text_noise:
                        topic = 1 - topic
                    if topic == 0:
                        target_topic_docs += 1
                    pool = topic_words[topic] + shared_words
                    picks = rng.choice(len(pool), size=cfg.words_per_doc, replace=False)
                    text = " ".join(pool[i] for i in picks)
                    fh.write(
                        json.dumps(
                            {"id": sid, "author": author, "subreddit": sub, "text": text},
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
                in_target = ci == cfg.target_community
                majority_target = target_topic_docs * 2 > cfg.submissions_per_author
                if cfg.label_rule == "graph_only":
                    label = int(in_target)
                elif cfg.label_rule == "text_only":
                    label = int(majority_target)
                else:
                    label = int(in_target and majority_target)
                n_positive += label
                label_rows.append((author, label, ci, target_topic_docs))

    with open(labels_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("author,label,community,target_topic_docs\n")
        for author, label, ci, k in label_rows:
            fh.write(f"{author},{label},{ci},{k}\n")

    return SynthDataset(
        records_path,
        labels_path,
        cfg.n_communities * cfg.authors_per_community,
        n_submissions,
        n_positive,
    )


def read_labels(path: str | Path) -> dict[str, int]:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            parts = line.strip().split(",")
            out[parts[0]] = int(parts[1])
    return out


def read_label_table(path: str | Path) -> list[tuple[str, int, int, int]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            author, label, ci, k = line.strip().split(",")
            out.append((author, int(label), int(ci), int(k)))
    return out
