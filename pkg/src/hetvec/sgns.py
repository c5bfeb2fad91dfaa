"""Skip-gram with negative sampling over walk corpora.

Two negative-sampling modes: the plain heterogeneous model draws negatives
from one global unigram pool, the ``++`` variant restricts the pool (and
the softmax normalization) to the context token's node type. Published
embeddings are the input vectors.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _kernels
from .errors import ConfigError, NotFoundError, ParseError, TrainingDiverged
from .graph import TAG_TYPES, NodeType
from .util import derive_seed, fmt_float, log_sigmoid, sigmoid

MODES = ("mp2v", "mp2v_pp")
_UNTYPED = 255  # type id for plain word tokens


class Vocab:
    """Token table with dense ids, counts, and optional node types.

    Ids are assigned by (count descending, token ascending), so a vocabulary
    is fully determined by its token counts.
    """

    def __init__(self, tokens: list[str], counts, types: list):
        self.tokens = tokens
        self.counts = np.asarray(counts, dtype=np.int64)
        self.types = types
        self.index = {tok: i for i, tok in enumerate(tokens)}
        self.total_count = int(self.counts.sum()) if len(tokens) else 0
        self.type_ids = np.array(
            [_UNTYPED if t is None else int(t) for t in types], dtype=np.uint8
        )

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id_of(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise NotFoundError(f"token {token!r} not in vocabulary") from None

    def type_of(self, token: str):
        return self.types[self.id_of(token)]

    def pool_ids(self, key) -> np.ndarray:
        """Token ids of one type pool; ``key=None`` selects every token."""
        if key is None:
            return np.arange(len(self.tokens), dtype=np.int64)
        return np.nonzero(self.type_ids == int(key))[0]

    def types_present(self) -> list:
        seen = sorted({int(t) for t in self.type_ids if t != _UNTYPED})
        out = [NodeType(t) for t in seen]
        if np.any(self.type_ids == _UNTYPED):
            out.append(None)
        return out


def _token_type(token: str, lineno: int):
    tag, sep, name = token.partition(":")
    if not sep or tag not in TAG_TYPES or not name:
        raise ParseError(f"line {lineno}: malformed typed token {token!r}")
    return TAG_TYPES[tag]


def build_vocab(corpus: str | Path, min_count: int = 5, typed: bool = True) -> Vocab:
    """Count corpus tokens and keep those with count >= min_count.

    Below-threshold tokens are excluded entirely; training later skips them
    rather than remapping. Typed corpora parse the node type from each
    token's tag prefix.
    """
    counts: dict[str, int] = {}
    with open(corpus, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            for tok in line.split():
                if typed:
                    _token_type(tok, lineno)
                counts[tok] = counts.get(tok, 0) + 1
    return vocab_from_counts(counts, min_count, typed=typed)


def vocab_from_counts(counts: dict, min_count: int, typed: bool = True) -> Vocab:
    kept = [(tok, n) for tok, n in counts.items() if n >= min_count]
    kept.sort(key=lambda kv: (-kv[1], kv[0]))
    tokens = [tok for tok, _ in kept]
    cnt = [n for _, n in kept]
    types = [_token_type(t, 0) if typed else None for t in tokens]
    return Vocab(tokens, cnt, types)


class NegativeTable:
    """Draws token ids with probability proportional to count**power per pool."""

    def __init__(self, vocab: Vocab, power: float, mode: str):
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.power = power
        self.pools: dict = {}
        keys = vocab.types_present() if mode == "mp2v_pp" else [None]
        for key in keys:
            ids = vocab.pool_ids(key)
            if len(ids) == 0:
                continue
            weights = vocab.counts[ids].astype(np.float64) ** power
            cdf = np.cumsum(weights)
            self.pools[key] = (ids.astype(np.int32), cdf)

    def pool_key(self, context_type) -> object:
        return context_type if self.mode == "mp2v_pp" else None

    def probabilities(self, key=None) -> dict:
        """Exact per-token sampling probabilities within one pool (for checks)."""
        ids, cdf = self._pool(key)
        weights = np.diff(np.concatenate([[0.0], cdf]))
        probs = weights / cdf[-1]
        return {int(i): float(p) for i, p in zip(ids, probs)}

    def _pool(self, key):
        try:
            return self.pools[key]
        except KeyError:
            raise ConfigError(f"no negative-sampling pool for type {key!r}") from None

    def ids_from_uniforms(self, key, u: np.ndarray) -> np.ndarray:
        ids, cdf = self._pool(key)
        idx = np.searchsorted(cdf, u * cdf[-1], side="right")
        return ids[np.minimum(idx, len(ids) - 1)]

    def sample(self, key, rng, size) -> np.ndarray:
        return self.ids_from_uniforms(key, rng.random(size))


def build_negative_table(vocab: Vocab, power: float = 0.75, mode: str = "mp2v") -> NegativeTable:
    if len(vocab) == 0:
        raise ConfigError("cannot build a negative table over an empty vocabulary")
    return NegativeTable(vocab, power, mode)


@dataclass
class EmbeddingMatrix:
    """Input and output weight tables, one row per vocabulary token."""

    input_vectors: np.ndarray
    output_vectors: np.ndarray

    @property
    def dimension(self) -> int:
        return self.input_vectors.shape[1]

    def check_finite(self) -> None:
        if not (np.isfinite(self.input_vectors).all() and np.isfinite(self.output_vectors).all()):
            raise TrainingDiverged("non-finite embedding values (learning rate too high?)")


@dataclass(frozen=True)
class SgnsConfig:
    dimension: int = 128
    window: int = 7
    negatives: int = 5
    epochs: int = 30
    initial_lr: float = 0.025
    min_lr: float = 0.0001
    min_count: int = 5
    mode: str = "mp2v"
    unigram_power: float = 0.75
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.dimension < 1 or self.window < 1 or self.negatives < 1 or self.epochs < 1:
            raise ConfigError("dimension, window, negatives, and epochs must be >= 1")
        if not self.initial_lr > self.min_lr >= 0.0:
            raise ConfigError("need initial_lr > min_lr >= 0")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.min_count < 0 or self.workers < 1:
            raise ConfigError("min_count must be >= 0 and workers >= 1")


def init_matrices(n_rows: int, dim: int, seed: int) -> EmbeddingMatrix:
    """Input rows uniform in [-0.5/D, 0.5/D); output rows zero."""
    rng = np.random.Generator(np.random.PCG64(seed))
    inp = (rng.random((n_rows, dim)) - 0.5) / dim
    out = np.zeros((n_rows, dim))
    return EmbeddingMatrix(inp, out)


def softmax_prob(
    emb: EmbeddingMatrix, vocab: Vocab, center: str, context: str, mode: str = "mp2v"
) -> float:
    """Exact softmax p(context | center) over the full vocabulary.

    In ``mp2v_pp`` mode the denominator ranges only over tokens of the
    context's node type.
    """
    v = vocab.id_of(center)
    c = vocab.id_of(context)
    if mode == "mp2v_pp":
        pool = vocab.pool_ids(vocab.types[c])
    else:
        pool = vocab.pool_ids(None)
    scores = emb.output_vectors[pool] @ emb.input_vectors[v]
    m = scores.max()
    exps = np.exp(scores - m)
    pos = int(np.nonzero(pool == c)[0][0])
    return float(exps[pos] / exps.sum())


def sgns_pair_update(
    emb: EmbeddingMatrix,
    vocab: Vocab,
    center: str,
    context: str,
    negatives: Iterable[str],
    lr: float,
) -> float:
    """One stochastic-gradient step for a (center, context, negatives) triple.

    Returns the loss -log sig(out_c . in_v) - sum_n log sig(-out_n . in_v)
    before the update. Gradient coefficients g = sigmoid(score) - label are
    computed from the pre-update matrices, then the accumulated output
    updates and the center update are applied, so the step is the exact
    gradient of the pair loss. Negatives equal to the context are ignored.
    """
    loss, g_in, g_out = pair_gradients(emb, vocab, center, context, negatives)
    if not np.isfinite(loss):
        raise TrainingDiverged("non-finite pair loss (learning rate too high?)")
    for row, grad in g_out.items():
        emb.output_vectors[row] -= lr * grad
    emb.input_vectors[vocab.id_of(center)] -= lr * g_in
    return loss


def pair_gradients(
    emb: EmbeddingMatrix, vocab: Vocab, center: str, context: str, negatives: Iterable[str]
) -> tuple[float, np.ndarray, dict]:
    """Loss and analytic gradients without applying any update.

    Returns (loss, d/d input[center], {row id: d/d output[row]}); duplicate
    negative rows accumulate into one gradient entry.
    """
    v = vocab.id_of(center)
    c = vocab.id_of(context)
    neg_ids = [vocab.id_of(n) for n in negatives]
    inp, out = emb.input_vectors, emb.output_vectors
    x = inp[v]
    g_in = np.zeros(emb.dimension)
    g_out: dict[int, np.ndarray] = {}
    loss = 0.0
    for row, label in [(c, 1.0)] + [(n, 0.0) for n in neg_ids]:
        if label == 0.0 and row == c:
            continue
        s = float(out[row] @ x)
        g = sigmoid(s) - label
        loss += -log_sigmoid(s) if label else -log_sigmoid(-s)
        g_in += g * out[row]
        g_out.setdefault(row, np.zeros(emb.dimension))
        g_out[row] += g * x
    return loss, g_in, g_out


def _line_pairs(ids: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """All (center, context) pairs within the window, offset-major order."""
    n = len(ids)
    if n < 2:
        empty = np.empty(0, dtype=np.int32)
        return empty, empty
    centers, contexts = [], []
    for off in range(1, min(window, n - 1) + 1):
        a, b = ids[:-off], ids[off:]
        centers.append(a)
        contexts.append(b)
        centers.append(b)
        contexts.append(a)
    return np.concatenate(centers), np.concatenate(contexts)


def _pair_count(n_tokens: int, window: int) -> int:
    return 2 * sum(n_tokens - off for off in range(1, min(window, n_tokens - 1) + 1)) if n_tokens >= 2 else 0


@dataclass
class SgnsTrainResult:
    embedding: EmbeddingMatrix
    vocab: Vocab
    epoch_losses: list = field(default_factory=list)
    total_pairs: int = 0


def _draw_negatives(table: NegativeTable, vocab: Vocab, contexts: np.ndarray, rng, m: int) -> np.ndarray:
    u = rng.random((len(contexts), m))
    negs = np.empty((len(contexts), m), dtype=np.int32)
    if table.mode == "mp2v":
        negs[:] = table.ids_from_uniforms(None, u)
    else:
        ctx_types = vocab.type_ids[contexts]
        for t in np.unique(ctx_types):
            key = None if t == _UNTYPED else NodeType(int(t))
            mask = ctx_types == t
            negs[mask] = table.ids_from_uniforms(key, u[mask])
    return negs


def train_skipgram(corpus: str | Path, cfg: SgnsConfig) -> SgnsTrainResult:
    """Train embeddings over a walk corpus.

    Out-of-vocabulary tokens are removed from each line before windowing.
    The learning rate decays linearly from initial_lr to min_lr over the
    total pair count. With a fixed seed and one worker the result is
    bit-reproducible.
    """
    vocab = build_vocab(corpus, cfg.min_count)
    if len(vocab) == 0:
        raise ConfigError("vocabulary is empty after the minimum-count filter")
    table = build_negative_table(vocab, cfg.unigram_power, cfg.mode)

    lines: list[np.ndarray] = []
    with open(corpus, "r", encoding="utf-8") as fh:
        for line in fh:
            ids = [vocab.index[t] for t in line.split() if t in vocab.index]
            if ids:
                lines.append(np.array(ids, dtype=np.int32))

    pair_offsets = np.zeros(len(lines) + 1, dtype=np.int64)
    for i, ids in enumerate(lines):
        pair_offsets[i + 1] = pair_offsets[i] + _pair_count(len(ids), cfg.window)
    epoch_pairs = int(pair_offsets[-1])
    total_pairs = epoch_pairs * cfg.epochs

    emb = init_matrices(len(vocab), cfg.dimension, derive_seed(cfg.rng_seed, "sgns-init"))
    slope = (cfg.min_lr - cfg.initial_lr) / total_pairs if total_pairs else 0.0

    def run_line(epoch: int, li: int) -> float:
        ids = lines[li]
        centers, contexts = _line_pairs(ids, cfg.window)
        if len(centers) == 0:
            return 0.0
        rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.rng_seed, "sgns", epoch, li)))
        negs = _draw_negatives(table, vocab, contexts, rng, cfg.negatives)
        t0 = epoch * epoch_pairs + int(pair_offsets[li])
        loss = _kernels.train_pairs(
            emb.input_vectors,
            emb.output_vectors,
            centers,
            contexts,
            negs,
            cfg.initial_lr,
            slope,
            cfg.min_lr,
            t0,
            True,
            True,
        )
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss on line {li} (learning rate too high?)")
        return loss

    result = SgnsTrainResult(emb, vocab, total_pairs=total_pairs)
    for epoch in range(cfg.epochs):
        if cfg.workers == 1:
            epoch_loss = sum(run_line(epoch, li) for li in range(len(lines)))
        else:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                epoch_loss = sum(pool.map(lambda li: run_line(epoch, li), range(len(lines))))
        result.epoch_losses.append(epoch_loss / max(epoch_pairs, 1))
    emb.check_finite()
    return result


def save_embeddings(emb: EmbeddingMatrix, vocab: Vocab, path: str | Path) -> None:
    """Text format: header '<vocab_size> <dimension>', then one token per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(vocab)} {emb.dimension}\n")
        for i, tok in enumerate(vocab.tokens):
            vals = " ".join(fmt_float(x) for x in emb.input_vectors[i])
            fh.write(f"{tok} {vals}\n")


def load_embeddings(path: str | Path) -> tuple[EmbeddingMatrix, Vocab]:
    """Inverse of ``save_embeddings``; output vectors load as zeros."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError(f"{path}: malformed embedding header")
        try:
            n, dim = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError(f"{path}: malformed embedding header") from None
        tokens: list[str] = []
        rows = np.zeros((n, dim))
        for i, line in enumerate(fh):
            parts = line.split()
            if i >= n or len(parts) != dim + 1:
                raise ParseError(f"{path}: row {i + 2} does not match header {n} x {dim}")
            tokens.append(parts[0])
            rows[i] = [float(x) for x in parts[1:]]
        if len(tokens) != n:
            raise ParseError(f"{path}: expected {n} rows, found {len(tokens)}")
    types = []
    for tok in tokens:
        tag, sep, name = tok.partition(":")
        types.append(TAG_TYPES.get(tag) if sep and name else None)
    vocab = Vocab(tokens, np.ones(n, dtype=np.int64), types)
    return EmbeddingMatrix(rows, np.zeros((n, dim))), vocab
