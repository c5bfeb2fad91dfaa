"""Text preprocessing and paragraph-vector training (DBOW and DMM).

Documents are token lists tagged with a document id, author, and subreddit
tag; every tag learns a vector. DBOW predicts each document word from each
tag vector alone. DMM predicts the word at each position from the mean of
the tag vectors and the word vectors inside the window.
"""

from __future__ import annotations

import json
import string
import unicodedata
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, NotFoundError, ParseError, TrainingDiverged
from .graph import DocRecord
from .sgns import NegativeTable, Vocab, vocab_from_counts
from .util import derive_seed, fmt_float

NUM_TOKEN = "<num>"
URL_TOKEN = "<www>"
_URL_PREFIXES = ("http://", "https://", "www.")
_PUNCT = set(string.punctuation)

INFER_LR0 = 0.025
INFER_LR_MIN = 0.0001


def _fold_ascii(text: str) -> str:
    return unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode("ascii")


def preprocess(text: str) -> list[str]:
    """Lowercase, ascii-fold, and tokenize; digits become <num>, URLs <www>.

    Slash-joined words split into their parts; punctuation is stripped from
    token edges; empty tokens drop. Idempotent over its own output.
    """
    out: list[str] = []
    # fold before lowercasing: compatibility decomposition can emit capitals
    for raw in _fold_ascii(text).lower().split():
        if raw in (NUM_TOKEN, URL_TOKEN):
            out.append(raw)
            continue
        if raw.startswith(_URL_PREFIXES):
            out.append(URL_TOKEN)
            continue
        for part in raw.split("/"):
            part = part.strip(string.punctuation)
            if not part:
                continue
            if any(ch.isdigit() for ch in part) and all(
                ch.isdigit() or ch in _PUNCT for ch in part
            ):
                out.append(NUM_TOKEN)
            else:
                out.append(part)
    return out


@dataclass(frozen=True)
class TaggedDocument:
    tokens: tuple
    tags: tuple

    def __post_init__(self):
        if not self.tags:
            raise ConfigError("a tagged document needs at least one tag")


def tag_documents(records: Iterable) -> tuple[list[TaggedDocument], int]:
    """One TaggedDocument per non-empty submission; returns (docs, excluded count).

    Tags are the document id, author, and subreddit as typed tokens.
    Documents whose text preprocesses to nothing are excluded and counted.
    """
    docs: list[TaggedDocument] = []
    excluded = 0
    for rec in records:
        tokens = preprocess(rec.text)
        if not tokens:
            excluded += 1
            continue
        docs.append(
            TaggedDocument(
                tuple(tokens),
                (f"d:{rec.id}", f"a:{rec.author}", f"r:{rec.subreddit}"),
            )
        )
    return docs, excluded


def write_doc_records(records: Iterable[DocRecord], path: str | Path) -> None:
    """Line-delimited {"id", "author", "subreddit", "text"} records."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {"id": rec.id, "author": rec.author, "subreddit": rec.subreddit, "text": rec.text},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_doc_records(path: str | Path) -> list[DocRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(DocRecord(rec["id"], rec["author"], rec["subreddit"], rec["text"]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(f"{path}:{lineno}: bad document record: {exc}") from None
    return out


@dataclass(frozen=True)
class DocConfig:
    dimension: int = 50
    window: int = 10
    negatives: int = 5
    min_count: int = 2
    epochs: int = 20
    initial_lr: float = 0.025
    min_lr: float = 0.0001
    unigram_power: float = 0.75
    infer_epochs: int = 50
    rng_seed: int = 0

    def __post_init__(self):
        if self.dimension < 1 or self.window < 1 or self.negatives < 1 or self.epochs < 1:
            raise ConfigError("dimension, window, negatives, and epochs must be >= 1")
        if not self.initial_lr > self.min_lr >= 0.0:
            raise ConfigError("need initial_lr > min_lr >= 0")
        if self.min_count < 0 or self.infer_epochs < 0:
            raise ConfigError("min_count and infer_epochs must be >= 0")


VARIANTS = ("dbow", "dmm")


@dataclass
class DocModel:
    variant: str
    word_vocab: Vocab
    tag_names: list
    tag_vectors: np.ndarray
    word_output: np.ndarray
    word_input: np.ndarray | None
    config: DocConfig
    epoch_losses: list = field(default_factory=list)
    tag_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tag_index:
            self.tag_index = {t: i for i, t in enumerate(self.tag_names)}

    @property
    def dimension(self) -> int:
        return self.tag_vectors.shape[1]

    def tag_vector(self, tag: str) -> np.ndarray:
        try:
            return self.tag_vectors[self.tag_index[tag]]
        except KeyError:
            raise NotFoundError(f"tag {tag!r} not in model") from None


def _prepare(docs: Sequence[TaggedDocument], cfg: DocConfig):
    counts: dict[str, int] = {}
    for doc in docs:
        for tok in doc.tokens:
            counts[tok] = counts.get(tok, 0) + 1
    vocab = vocab_from_counts(counts, cfg.min_count, typed=False)
    if len(vocab) == 0:
        raise ConfigError("word vocabulary is empty after the minimum-count filter")
    tag_names: list[str] = []
    tag_index: dict[str, int] = {}
    for doc in docs:
        for tag in doc.tags:
            if tag not in tag_index:
                tag_index[tag] = len(tag_names)
                tag_names.append(tag)
    doc_word_ids = [
        np.array([vocab.index[t] for t in doc.tokens if t in vocab.index], dtype=np.int32)
        for doc in docs
    ]
    doc_tag_ids = [
        np.array([tag_index[t] for t in doc.tags], dtype=np.int32) for doc in docs
    ]
    return vocab, tag_names, tag_index, doc_word_ids, doc_tag_ids


def _init_rows(n: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    return (rng.random((n, dim)) - 0.5) / dim


def _train(docs: Sequence[TaggedDocument], cfg: DocConfig, variant: str) -> DocModel:
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if not docs:
        raise ConfigError("no documents to train on")
    vocab, tag_names, tag_index, doc_word_ids, doc_tag_ids = _prepare(docs, cfg)
    table = NegativeTable(vocab, cfg.unigram_power, "mp2v")

    dim = cfg.dimension
    tag_vecs = _init_rows(len(tag_names), dim, derive_seed(cfg.rng_seed, variant, "tags"))
    word_out = np.zeros((len(vocab), dim))
    word_in = (
        _init_rows(len(vocab), dim, derive_seed(cfg.rng_seed, variant, "words"))
        if variant == "dmm"
        else None
    )

    def n_updates(di: int) -> int:
        n_w = len(doc_word_ids[di])
        return n_w * len(doc_tag_ids[di]) if variant == "dbow" else n_w

    offsets = np.zeros(len(docs) + 1, dtype=np.int64)
    for di in range(len(docs)):
        offsets[di + 1] = offsets[di] + n_updates(di)
    epoch_updates = int(offsets[-1])
    total_updates = epoch_updates * cfg.epochs
    slope = (cfg.min_lr - cfg.initial_lr) / total_updates if total_updates else 0.0

    model = DocModel(variant, vocab, tag_names, tag_vecs, word_out, word_in, cfg, [], tag_index)
    for epoch in range(cfg.epochs):
        epoch_loss = 0.0
        for di in range(len(docs)):
            word_ids = doc_word_ids[di]
            if len(word_ids) == 0:
                continue
            tag_ids = doc_tag_ids[di]
            rng = np.random.Generator(
                np.random.PCG64(derive_seed(cfg.rng_seed, variant, epoch, di))
            )
            t0 = epoch * epoch_updates + int(offsets[di])
            if variant == "dbow":
                centers = np.tile(tag_ids, len(word_ids))
                contexts = np.repeat(word_ids, len(tag_ids))
                negs = table.sample(None, rng, (len(centers), cfg.negatives)).astype(np.int32)
                loss = _kernels.train_pairs(
                    tag_vecs, word_out, centers, contexts, negs,
                    cfg.initial_lr, slope, cfg.min_lr, t0, True, True,
                )
            else:
                negs = table.sample(None, rng, (len(word_ids), cfg.negatives)).astype(np.int32)
                loss = _kernels.train_doc_mean_context(
                    tag_vecs, word_in, word_out, tag_ids, word_ids, cfg.window, negs,
                    cfg.initial_lr, slope, cfg.min_lr, t0, True, True, True,
                )
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss on document {di}")
            epoch_loss += loss
        model.epoch_losses.append(epoch_loss / max(epoch_updates, 1))
    return model


def train_dbow(docs: Sequence[TaggedDocument], cfg: DocConfig) -> DocModel:
    """Train the distributed bag-of-words variant: each tag predicts each word."""
    return _train(docs, cfg, "dbow")


def train_dmm(docs: Sequence[TaggedDocument], cfg: DocConfig) -> DocModel:
    """Train the distributed-memory variant with mean-combined context."""
    return _train(docs, cfg, "dmm")


def infer_vector(
    model: DocModel,
    tokens: Sequence[str],
    infer_epochs: int | None = None,
    rng_seed: int = 0,
) -> np.ndarray:
    """Infer a vector for an unseen token list against frozen word matrices.

    A fresh tag vector is seeded from ``rng_seed`` and trained for
    ``infer_epochs`` passes over this document only. With no in-vocab token
    the seeded initialization comes back unchanged (with a warning).
    """
    epochs = model.config.infer_epochs if infer_epochs is None else infer_epochs
    dim = model.dimension
    vec = _init_rows(1, dim, derive_seed(rng_seed, "infer-init"))
    word_ids = np.array(
        [model.word_vocab.index[t] for t in tokens if t in model.word_vocab.index],
        dtype=np.int32,
    )
    if len(word_ids) == 0:
        warnings.warn("no in-vocabulary token; returning the initialization vector")
        return vec[0]
    if epochs == 0:
        return vec[0]
    table = getattr(model, "_table_cache", None)
    if table is None:
        table = NegativeTable(model.word_vocab, model.config.unigram_power, "mp2v")
        model._table_cache = table
    tag_ids = np.zeros(1, dtype=np.int32)
    per_epoch = len(word_ids) * (len(tag_ids) if model.variant == "dbow" else 1)
    total = per_epoch * epochs
    slope = (INFER_LR_MIN - INFER_LR0) / total if total else 0.0
    for epoch in range(epochs):
        rng = np.random.Generator(np.random.PCG64(derive_seed(rng_seed, "infer", epoch)))
        t0 = epoch * per_epoch
        if model.variant == "dbow":
            centers = np.zeros(len(word_ids), dtype=np.int32)
            negs = table.sample(None, rng, (len(word_ids), model.config.negatives)).astype(np.int32)
            _kernels.train_pairs(
                vec, model.word_output, centers, word_ids, negs,
                INFER_LR0, slope, INFER_LR_MIN, t0, True, False,
            )
        else:
            negs = table.sample(None, rng, (len(word_ids), model.config.negatives)).astype(np.int32)
            _kernels.train_doc_mean_context(
                vec, model.word_input, model.word_output, tag_ids, word_ids,
                model.config.window, negs,
                INFER_LR0, slope, INFER_LR_MIN, t0, True, False, False,
            )
    if not np.isfinite(vec).all():
        raise TrainingDiverged("non-finite inferred vector")
    return vec[0]


def concat_doc_vectors(dbow_vec: np.ndarray, dmm_vec: np.ndarray) -> np.ndarray:
    """Concatenate the two variants' vectors, DBOW half first."""
    return np.concatenate([np.asarray(dbow_vec), np.asarray(dmm_vec)])


def save_doc_model(model: DocModel, path: str | Path) -> None:
    """Sectioned text format: WORDS-IN / WORDS-OUT / TAGS / COUNTS."""
    vocab = model.word_vocab
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cfg = model.config
        fh.write(
            f"DOCMODEL 1 {model.variant} {cfg.dimension} {cfg.window} "
            f"{cfg.negatives} {cfg.min_count} {fmt_float(cfg.unigram_power)} {cfg.infer_epochs}\n"
        )

        def section(name, tokens, matrix):
            n = 0 if matrix is None else len(tokens)
            d = model.dimension
            fh.write(f"{name} {n} {d}\n")
            if matrix is None:
                return
            for i, tok in enumerate(tokens):
                fh.write(tok + " " + " ".join(fmt_float(x) for x in matrix[i]) + "\n")

        section("WORDS-IN", vocab.tokens, model.word_input)
        section("WORDS-OUT", vocab.tokens, model.word_output)
        section("TAGS", model.tag_names, model.tag_vectors)
        fh.write(f"COUNTS {len(vocab)}\n")
        for tok, cnt in zip(vocab.tokens, vocab.counts):
            fh.write(f"{tok} {int(cnt)}\n")


def load_doc_model(path: str | Path) -> DocModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 9 or header[0] != "DOCMODEL" or header[1] != "1":
            raise ParseError(f"{path}: not a version-1 doc model file")
        variant = header[2]
        if variant not in VARIANTS:
            raise ParseError(f"{path}: unknown variant {variant!r}")
        cfg = DocConfig(
            dimension=int(header[3]),
            window=int(header[4]),
            negatives=int(header[5]),
            min_count=int(header[6]),
            unigram_power=float(header[7]),
            infer_epochs=int(header[8]),
        )

        def read_section(name):
            head = fh.readline().split()
            if len(head) != 3 or head[0] != name:
                raise ParseError(f"{path}: expected section {name}")
            n, d = int(head[1]), int(head[2])
            tokens, rows = [], np.zeros((n, d))
            for i in range(n):
                parts = fh.readline().split()
                if len(parts) != d + 1:
                    raise ParseError(f"{path}: ragged row in section {name}")
                tokens.append(parts[0])
                rows[i] = [float(x) for x in parts[1:]]
            return tokens, rows

        in_tokens, word_in = read_section("WORDS-IN")
        out_tokens, word_out = read_section("WORDS-OUT")
        tag_names, tag_vecs = read_section("TAGS")
        head = fh.readline().split()
        if len(head) != 2 or head[0] != "COUNTS":
            raise ParseError(f"{path}: expected section COUNTS")
        counts = {}
        for _ in range(int(head[1])):
            tok, cnt = fh.readline().split()
            counts[tok] = int(cnt)
    vocab = Vocab(out_tokens, [counts[t] for t in out_tokens], [None] * len(out_tokens))
    return DocModel(
        variant,
        vocab,
        tag_names,
        tag_vecs,
        word_out,
        word_in if in_tokens else None,
        cfg,
    )
