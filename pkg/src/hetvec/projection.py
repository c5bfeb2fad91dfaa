"""2-D projection of embedding vectors onto their two leading principal axes.

Coordinates are plot-ready and exported as CSV so external tools can redo
the reduction with fancier methods if desired.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .sgns import EmbeddingMatrix, Vocab
from .util import fmt_float

_RANK_TOL = 1e-12


@dataclass(frozen=True)
class Projection2D:
    tokens: tuple
    coords: np.ndarray  # (n, 2)
    rank_deficient: bool = False

    def mapping(self) -> dict:
        return {t: (float(x), float(y)) for t, (x, y) in zip(self.tokens, self.coords)}


def project_points_2d(points: np.ndarray, tokens: Sequence[str]) -> Projection2D:
    """Project row vectors onto the top-2 principal axes of the centered cloud.

    Deterministic sign convention: the first nonzero loading of each axis is
    positive. Rank-1 input yields an all-zero second coordinate and a flag.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ConfigError("need at least 3 points to project")
    if X.shape[1] < 2:
        raise ConfigError("need dimension >= 2")
    centered = X - X.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    coords = np.zeros((X.shape[0], 2))
    rank_deficient = False
    for axis in range(2):
        if svals[axis] <= _RANK_TOL * max(svals[0], 1.0):
            rank_deficient = True
            continue
        loading = vt[axis]
        nz = np.nonzero(np.abs(loading) > _RANK_TOL)[0]
        if len(nz) and loading[nz[0]] < 0:
            loading = -loading
        coords[:, axis] = centered @ loading
    if rank_deficient:
        warnings.warn("point cloud has rank < 2; second coordinate is zero")
    return Projection2D(tuple(tokens), coords, rank_deficient)


def pca_project_2d(emb: EmbeddingMatrix, vocab: Vocab, tokens: Sequence[str]) -> Projection2D:
    """Projection of the selected tokens' input vectors."""
    ids = [vocab.id_of(t) for t in tokens]
    return project_points_2d(emb.input_vectors[ids], tokens)


def write_projection_csv(proj: Projection2D, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["token", "x", "y"])
        for tok, (x, y) in zip(proj.tokens, proj.coords):
            w.writerow([tok, fmt_float(x), fmt_float(y)])
