"""Second-order autoregressive graph Volterra model.

The model reads ``X = H1 X + H2 Y + V + E`` with ``Y`` the column-wise
Kronecker (Khatri-Rao) lift of ``X``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .complex import PairwiseKernel, Sc2, TupleKernel

__all__ = [
    "GeneratorConfig",
    "SignalMatrix",
    "SyntheticInstance",
    "generate",
    "ingest_real",
    "khatri_rao_lift",
    "residual",
]

SIGNAL_DISTS = ("uniform", "uniform_centered")


@dataclass(frozen=True)
class SignalMatrix:
    """Nodal observations ``x`` (``n x r``) and optional exogenous term ``v``.

    ``v=None`` means the exogenous term is unknown and treated as zero.
    """

    x: np.ndarray
    v: np.ndarray | None = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"signals must be a 2-D array, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("signals contain non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if self.v is not None:
            v = np.array(self.v, dtype=float)
            if v.shape != x.shape:
                raise ValueError(f"exogenous term shape {v.shape} != signal shape {x.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError("exogenous term contains non-finite entries")
            v.setflags(write=False)
            object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def r(self) -> int:
        return self.x.shape[1]

    def v_or_zero(self) -> np.ndarray:
        return np.zeros_like(self.x) if self.v is None else self.v

    def without_v(self) -> "SignalMatrix":
        return SignalMatrix(self.x)

    def columns(self, idx) -> "SignalMatrix":
        v = None if self.v is None else self.v[:, idx]
        return SignalMatrix(self.x[:, idx], v)


def khatri_rao_lift(x) -> np.ndarray:
    """Lift ``n x r`` signals to the ``n**2 x r`` matrix of pairwise products.

    Row ``i * n + j`` holds ``x[i] * x[j]``.
    """
    x = np.asarray(getattr(x, "x", x), dtype=float)
    n, r = x.shape
    return (x[:, None, :] * x[None, :, :]).reshape(n * n, r)


def residual(x, y, h1, h2, v=None) -> np.ndarray:
    """Model residual ``X - H1 X - H2 Y - V``.

    ``x`` may be a :class:`SignalMatrix`, in which case its ``v`` is used
    unless ``v`` is given explicitly.
    """
    if isinstance(x, SignalMatrix):
        v = x.v if v is None else v
        x = x.x
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    n, r = x.shape
    if y.shape != (n * n, r) or h1.shape != (n, n) or h2.shape != (n, n * n):
        raise ValueError(
            f"inconsistent shapes: x {x.shape}, y {y.shape}, h1 {h1.shape}, h2 {h2.shape}"
        )
    out = x - h1 @ x - h2 @ y
    if v is not None:
        v = np.asarray(v, dtype=float)
        if v.shape != x.shape:
            raise ValueError(f"exogenous term shape {v.shape} != signal shape {x.shape}")
        out -= v
    return out


@dataclass(frozen=True)
class GeneratorConfig:
    """Synthetic benchmark parameters.

    Kernels are rescaled so that ``||H1 X + H2 Y|| / ||X|| == target_ratio``
    (set it to ``None`` to keep the raw weights).
    """

    n: int = 20
    r: int = 100
    edge_prob: float = 0.15
    tri_fill_prob: float = 1.0
    h1_weight_range: tuple[float, float] = (0.3, 0.8)
    h2_weight_range: tuple[float, float] = (0.1, 0.4)
    noise_std: float = 0.0
    seed: int = 0
    signal_dist: str = "uniform"
    target_ratio: float | None = 0.8

    def __post_init__(self):
        if self.n < 1 or self.r < 1:
            raise ValueError(f"n and r must be positive, got n={self.n}, r={self.r}")
        for name in ("edge_prob", "tri_fill_prob"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        for name in ("h1_weight_range", "h2_weight_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be nonnegative, got {self.noise_std}")
        if self.signal_dist not in SIGNAL_DISTS:
            raise ValueError(f"signal_dist must be one of {SIGNAL_DISTS}, got {self.signal_dist!r}")
        if self.target_ratio is not None and not self.target_ratio > 0:
            raise ValueError(f"target_ratio must be positive, got {self.target_ratio}")


@dataclass(frozen=True)
class SyntheticInstance:
    signals: SignalMatrix
    h1: PairwiseKernel
    h2: TupleKernel
    truth: Sc2


def _draw_signals(rng: np.random.Generator, cfg: GeneratorConfig) -> np.ndarray:
    if cfg.signal_dist == "uniform":
        return rng.uniform(0.1, 1.0, size=(cfg.n, cfg.r))
    return rng.uniform(-1.0, 1.0, size=(cfg.n, cfg.r))


def generate(cfg: GeneratorConfig) -> SyntheticInstance:
    """Draw a random instance that satisfies the model exactly.

    ``H1`` is a symmetric Erdos-Renyi adjacency with uniform weights. Each
    triangle of ``H1`` is filled with probability ``tri_fill_prob``, in which
    case all six of its tuple entries share one uniform weight. Signals are
    drawn first and the exogenous term is defined as ``V = X - H1 X - H2 Y - E``.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    iu = np.triu_indices(n, 1)
    present = rng.random(len(iu[0])) < cfg.edge_prob
    weights = rng.uniform(*cfg.h1_weight_range, size=len(iu[0]))
    h1 = np.zeros((n, n))
    h1[iu] = np.where(present, weights, 0.0)
    h1 = h1 + h1.T

    h2 = np.zeros((n, n * n))
    filled = []
    for i, j, k in itertools.combinations(range(n), 3):
        if h1[i, j] and h1[i, k] and h1[j, k]:
            fill = rng.random() < cfg.tri_fill_prob
            w = rng.uniform(*cfg.h2_weight_range)
            if fill:
                filled.append((i, j, k))
                for a, b, c in itertools.permutations((i, j, k)):
                    h2[a, b * n + c] = w

    x = _draw_signals(rng, cfg)
    e = rng.normal(0.0, cfg.noise_std, size=x.shape) if cfg.noise_std > 0 else np.zeros_like(x)
    y = khatri_rao_lift(x)

    if cfg.target_ratio is not None:
        drive = np.linalg.norm(h1 @ x + h2 @ y)
        if drive > 0:
            scale = cfg.target_ratio * np.linalg.norm(x) / drive
            h1 *= scale
            h2 *= scale

    v = x - h1 @ x - h2 @ y - e
    edges = {(int(i), int(j)): float(h1[i, j]) for i, j in zip(*iu) if h1[i, j] > 0}
    tris = {t: float(h2[t[0], t[1] * n + t[2]]) for t in filled}
    return SyntheticInstance(
        SignalMatrix(x, v),
        PairwiseKernel(h1, symmetric=True),
        TupleKernel(h2, tuple_symmetric=True),
        Sc2(n, edges, tris),
    )


def ingest_real(x_path, v_path=None, edges_path=None, triangles_path=None):
    """Load signals (and optionally a ground-truth complex) from CSV files.

    Returns ``(SignalMatrix, Sc2 or None)``. Errors name the offending file
    and cell.
    """
    from . import io

    x = io.read_dense(x_path)
    v = None
    if v_path is not None:
        v = io.read_dense(v_path)
        if v.shape != x.shape:
            raise io.InputError(f"{v_path}: shape {v.shape} does not match signals {x.shape}")
    signals = SignalMatrix(x, v)
    truth = None
    if edges_path is not None:
        truth = io.read_sc2(signals.n, edges_path, triangles_path)
    return signals, truth
