"""Similarity features: cosine queries, author profiles, correlations, rows.

An author's text profile is the mean and population standard deviation of
their submissions' inferred-vector cosines to a target tag, per document
model. Classifier rows come in three modes: the author's graph embedding,
the two text means, or their concatenation.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .docembed import DocModel, infer_vector
from .errors import ConfigError, NotFoundError
from .graph import NodeType
from .sgns import EmbeddingMatrix, Vocab
from .util import derive_seed, fmt_float

MODES = ("graph_only", "text_only", "integrated")


def cosine(a, b) -> float:
    """a.b / (|a||b|); 0 by convention (with a warning) if either norm is 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ConfigError(f"length mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        warnings.warn("cosine of a zero vector; returning 0.0", RuntimeWarning)
        return 0.0
    return float(a @ b / (na * nb))


def nearest_neighbors(
    emb: EmbeddingMatrix,
    vocab: Vocab,
    query: str,
    k: int,
    type_filter: NodeType | None = None,
) -> list[tuple[str, float]]:
    """Top-k tokens by cosine to the query's input vector (query excluded).

    Exact full scan; ties break by token id ascending.
    """
    q = vocab.id_of(query)
    vecs = emb.input_vectors
    norms = np.linalg.norm(vecs, axis=1)
    qn = norms[q]
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = vecs @ vecs[q]
        denom = norms * qn
        sims = np.where(denom > 0, sims / np.where(denom > 0, denom, 1.0), 0.0)
    candidates = vocab.pool_ids(type_filter) if type_filter is not None else np.arange(len(vocab))
    candidates = candidates[candidates != q]
    order = sorted(candidates, key=lambda i: (-sims[i], i))
    return [(vocab.tokens[int(i)], float(sims[int(i)])) for i in order[:k]]


@dataclass(frozen=True)
class SimilarityProfile:
    author: str
    dbow_mean: float
    dbow_std: float
    dmm_mean: float
    dmm_std: float
    n_submissions: int


def author_target_similarity(
    dbow: DocModel,
    dmm: DocModel,
    author: str,
    author_docs: Sequence[Sequence[str]],
    target_tag: str,
    seed: int = 0,
    infer_epochs: int | None = None,
) -> SimilarityProfile | None:
    """Mean and population std of per-submission cosines to the target tag.

    Each non-empty document is inferred under both models and compared with
    the target tag's trained vector in the matching model. Per-document
    inference seeds derive from the token content, so the profile does not
    depend on document order. Returns None when every document is empty
    (the author is excluded upstream).
    """
    docs = [list(d) for d in author_docs if len(d) > 0]
    if not docs:
        return None
    t_dbow = dbow.tag_vector(target_tag)
    t_dmm = dmm.tag_vector(target_tag)
    sims_dbow, sims_dmm = [], []
    for tokens in docs:
        key = tuple(tokens)
        v1 = infer_vector(dbow, tokens, infer_epochs, rng_seed=derive_seed(seed, "dbow", key))
        v2 = infer_vector(dmm, tokens, infer_epochs, rng_seed=derive_seed(seed, "dmm", key))
        sims_dbow.append(cosine(v1, t_dbow))
        sims_dmm.append(cosine(v2, t_dmm))
    a1 = np.array(sims_dbow)
    a2 = np.array(sims_dmm)
    return SimilarityProfile(
        author,
        float(a1.mean()),
        float(a1.std()),
        float(a2.mean()),
        float(a2.std()),
        len(docs),
    )


def graph_target_similarity(emb: EmbeddingMatrix, vocab: Vocab, author_token: str, target_token: str) -> float:
    """Cosine between an author's and the target subreddit's graph vectors."""
    return cosine(
        emb.input_vectors[vocab.id_of(author_token)],
        emb.input_vectors[vocab.id_of(target_token)],
    )


def pearson_matrix(
    columns: dict[str, Sequence[float]],
    derive_doc_mean: bool = True,
) -> tuple[list[str], np.ndarray]:
    """Pairwise Pearson correlations; diagonal exactly 1.

    When both 'dbow_mean' and 'dmm_mean' columns are present (and
    ``derive_doc_mean``), a derived column 'd2v_mean' holding their
    elementwise mean is appended. A constant column is an error.
    """
    cols = {name: np.asarray(v, dtype=np.float64) for name, v in columns.items()}
    if derive_doc_mean and "dbow_mean" in cols and "dmm_mean" in cols:
        cols["d2v_mean"] = (cols["dbow_mean"] + cols["dmm_mean"]) / 2.0
    names = list(cols)
    lengths = {len(v) for v in cols.values()}
    if len(lengths) != 1 or min(lengths) < 2:
        raise ConfigError("columns must share one length >= 2")
    for name, v in cols.items():
        if np.ptp(v) == 0.0:
            raise ConfigError(f"column {name!r} is constant; correlation undefined")
    mat = np.corrcoef(np.stack([cols[n] for n in names]))
    np.fill_diagonal(mat, 1.0)
    return names, mat


@dataclass(frozen=True)
class FeatureRow:
    author: str
    mode: str
    values: np.ndarray
    label: int


def assemble_features(
    author: str,
    graph_vec: np.ndarray | None,
    profile: SimilarityProfile | None,
    mode: str,
    label: int,
    use_stds: bool = False,
) -> FeatureRow | None:
    """One classifier row; None when a needed input is missing (author dropped)."""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    need_graph = mode in ("graph_only", "integrated")
    need_text = mode in ("text_only", "integrated")
    if (need_graph and graph_vec is None) or (need_text and profile is None):
        return None
    parts = []
    if need_graph:
        parts.append(np.asarray(graph_vec, dtype=np.float64))
    if need_text:
        text = [profile.dbow_mean, profile.dmm_mean]
        if use_stds:
            text += [profile.dbow_std, profile.dmm_std]
        parts.append(np.array(text))
    return FeatureRow(author, mode, np.concatenate(parts), int(label))


def build_feature_table(
    authors: Sequence[str],
    labels: dict[str, int],
    graph_vectors: dict[str, np.ndarray],
    profiles: dict[str, SimilarityProfile],
    mode: str,
    use_stds: bool = False,
) -> tuple[list[FeatureRow], int]:
    """Rows for every author with complete inputs; returns (rows, dropped)."""
    rows: list[FeatureRow] = []
    dropped = 0
    for author in authors:
        row = assemble_features(
            author,
            graph_vectors.get(author),
            profiles.get(author),
            mode,
            labels[author],
            use_stds,
        )
        if row is None:
            dropped += 1
        else:
            rows.append(row)
    return rows, dropped


def write_feature_csv(rows: Sequence[FeatureRow], path: str | Path) -> None:
    """CSV with header: author, f0..fn, label (label column last)."""
    if not rows:
        raise ConfigError("no feature rows to write")
    width = len(rows[0].values)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["author"] + [f"f{i}" for i in range(width)] + ["label"])
        for row in rows:
            if len(row.values) != width:
                raise ConfigError("inconsistent feature widths")
            w.writerow([row.author] + [fmt_float(x) for x in row.values] + [row.label])


def read_feature_csv(path: str | Path, mode: str = "integrated") -> list[FeatureRow]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:1] != ["author"] or header[-1:] != ["label"]:
            raise ConfigError(f"{path}: not a feature table")
        rows = []
        for rec in reader:
            rows.append(
                FeatureRow(rec[0], mode, np.array([float(x) for x in rec[1:-1]]), int(rec[-1]))
            )
    return rows


def write_profile_csv(profiles: Iterable[SimilarityProfile], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["author", "dbow_mean", "dbow_std", "dmm_mean", "dmm_std", "n"])
        for p in profiles:
            w.writerow(
                [p.author]
                + [fmt_float(x) for x in (p.dbow_mean, p.dbow_std, p.dmm_mean, p.dmm_std)]
                + [p.n_submissions]
            )


def read_profile_csv(path: str | Path) -> dict[str, SimilarityProfile]:
    out = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            out[rec[0]] = SimilarityProfile(
                rec[0], float(rec[1]), float(rec[2]), float(rec[3]), float(rec[4]), int(rec[5])
            )
    return out
