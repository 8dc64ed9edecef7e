"""Correlation-thresholded clique complex (RC) baseline."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .complex import PairwiseKernel, Sc2, TupleKernel, kernels_from_sc2
from .io import InputError

__all__ = ["RcConfig", "correlation_matrix", "rc_infer"]

WEIGHT_RULES = ("min", "product")


@dataclass(frozen=True)
class RcConfig:
    threshold: float = 0.5
    weight_rule: str = "min"

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.weight_rule not in WEIGHT_RULES:
            raise ValueError(f"weight_rule must be one of {WEIGHT_RULES}, got {self.weight_rule!r}")


def correlation_matrix(x) -> np.ndarray:
    """Pearson correlation between node rows, clipped to ``[-1, 1]``."""
    x = np.asarray(getattr(x, "x", x), dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise InputError(f"need at least two realizations, got shape {x.shape}")
    xc = x - x.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(xc, axis=1)
    flat = np.flatnonzero(norms <= 1e-12 * max(1.0, float(np.abs(x).max())))
    if len(flat):
        raise InputError(f"node {int(flat[0])} has zero variance; correlation undefined")
    z = xc / norms[:, None]
    corr = np.clip(z @ z.T, -1.0, 1.0)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return corr


def rc_from_correlation(corr: np.ndarray, cfg: RcConfig) -> tuple[Sc2, PairwiseKernel, TupleKernel]:
    n = corr.shape[0]
    mag = np.abs(corr)
    edges = {
        (int(i), int(j)): float(mag[i, j])
        for i, j in zip(*np.triu_indices(n, 1))
        if mag[i, j] >= cfg.threshold
    }
    tris = {}
    for i, j, k in itertools.combinations(range(n), 3):
        if (i, j) in edges and (i, k) in edges and (j, k) in edges:
            w = (edges[i, j], edges[i, k], edges[j, k])
            tris[(i, j, k)] = min(w) if cfg.weight_rule == "min" else float(np.prod(w))
    sc = Sc2(n, edges, tris)
    h1, h2 = kernels_from_sc2(sc)
    return sc, PairwiseKernel(h1, symmetric=True), TupleKernel(h2, tuple_symmetric=True)


def rc_infer(x, cfg: RcConfig | None = None) -> tuple[Sc2, PairwiseKernel, TupleKernel]:
    """Threshold absolute correlations into a graph and fill all its triangles.

    Edge weights are the absolute correlations; a triangle's weight is the
    min (or product) of its three edge weights and is copied to all six
    of its tuple entries.
    """
    cfg = RcConfig() if cfg is None else cfg
    return rc_from_correlation(correlation_matrix(x), cfg)
