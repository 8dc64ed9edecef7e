"""Estimation error and support recovery scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complex import Sc2, extract_sc2

__all__ = ["EvalResult", "UndefinedMetricError", "evaluate", "frob_err", "support_fscore"]


class UndefinedMetricError(ValueError):
    """Raised when a normalised error has a zero reference."""


def frob_err(estimate, truth) -> float:
    """Normalised squared Frobenius error ``||truth - estimate||^2 / ||truth||^2``."""
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(truth, dtype=float)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: estimate {est.shape}, truth {ref.shape}")
    denom = float(np.sum(ref * ref))
    if denom == 0:
        raise UndefinedMetricError("truth has zero norm; normalised error is undefined")
    return float(np.sum((ref - est) ** 2)) / denom


def _prf(est: set, ref: set) -> tuple[float, float, float]:
    if not est and not ref:
        return 1.0, 1.0, 1.0
    tp = len(est & ref)
    p = tp / len(est) if est else 0.0
    r = tp / len(ref) if ref else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return f, p, r


@dataclass(frozen=True)
class SupportScores:
    fscore_edges: float
    fscore_triangles: float
    precision_edges: float
    recall_edges: float
    precision_triangles: float
    recall_triangles: float


def support_fscore(estimate: Sc2, truth: Sc2) -> SupportScores:
    """Binary support agreement of edges and of filled triangles.

    Two empty supports agree perfectly (score 1).
    """
    if estimate.n != truth.n:
        raise ValueError(f"node counts differ: {estimate.n} vs {truth.n}")
    fe, pe, re_ = _prf(set(estimate.edges), set(truth.edges))
    ft, pt, rt = _prf(set(estimate.triangles), set(truth.triangles))
    return SupportScores(fe, ft, pe, re_, pt, rt)


@dataclass(frozen=True)
class EvalResult:
    err_h1: float
    err_h2: float
    fscore_edges: float
    fscore_triangles: float
    precision_edges: float
    recall_edges: float
    precision_triangles: float
    recall_triangles: float

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def evaluate(est_h1, est_h2, true_h1, true_h2, edge_threshold: float = 0.0,
             tri_threshold: float = 0.0) -> EvalResult:
    """Score estimated kernels against ground-truth kernels.

    Supports are read off both pairs with :func:`extract_sc2` at the same
    thresholds. ``err_h2`` is NaN when the true ``H2`` is zero (no filled
    triangle), since the normalised error has no reference then.
    """
    est_h1, est_h2, true_h1, true_h2 = (
        np.asarray(a, dtype=float) for a in (est_h1, est_h2, true_h1, true_h2)
    )
    err_h1 = frob_err(est_h1, true_h1)
    try:
        err_h2 = frob_err(est_h2, true_h2)
    except UndefinedMetricError:
        if est_h2.shape != true_h2.shape:
            raise
        err_h2 = float("nan")
    s = support_fscore(
        extract_sc2(est_h1, est_h2, edge_threshold, tri_threshold),
        extract_sc2(true_h1, true_h2, edge_threshold, tri_threshold),
    )
    return EvalResult(err_h1, err_h2, **s.__dict__)
