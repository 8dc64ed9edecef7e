"""Convex joint estimation of the pairwise and node-to-tuple kernels.

The estimator minimises

    ||X - H1 X - H2 Y - V||_F^2 + alpha ||H1||_1 + beta ||H2||_1
        + gamma * sum_groups ||[H1, H2]_group||_2

over nonnegative, masked (and optionally symmetric) kernels. Each group
collects the edge and node-to-tuple entries of one node triple. Groups
overlap on edge entries, so :func:`solve` uses consensus ADMM: a base copy
carries the least-squares term, one copy carries the elementwise terms and
constraints, and one small copy per triple carries the group norms.
:func:`reference_solve` is a deliberately plain projected subgradient
method kept as an independent check.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .complex import (
    GroupIndex,
    MaskPair,
    PairwiseKernel,
    TupleKernel,
    default_masks,
    enumerate_triplet_groups,
    group_index,
)
from .model import SignalMatrix, khatri_rao_lift

__all__ = [
    "SolveConfig",
    "SolveReport",
    "objective",
    "prox_group",
    "prox_nonneg_l1",
    "reference_solve",
    "solve",
    "solve_path",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    alpha: float = 0.1
    beta: float = 0.1
    gamma: float = 0.1
    rho: float = 1.0
    max_iter: int = 5000
    tol_abs: float = 1e-6
    tol_rel: float = 1e-5
    symmetric_h1: bool = False
    symmetric_h2: bool = False
    masks: MaskPair | None = None
    adapt_rho: bool = True
    relax: float = 1.6
    workers: int = 1

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not (self.tol_abs > 0 and self.tol_rel > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be positive, got {self.max_iter}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")


@dataclass(frozen=True)
class SolveReport:
    h1: PairwiseKernel
    h2: TupleKernel
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    objective_trace: np.ndarray = field(repr=False)
    rho: float = float("nan")


def prox_nonneg_l1(value, lam):
    """Proximal map of ``lam * u + indicator(u >= 0)``: ``max(value - lam, 0)``."""
    return np.maximum(np.asarray(value, dtype=float) - lam, 0.0)


def prox_group(vector, kappa):
    """Block soft-thresholding, the proximal map of ``kappa * ||u||_2``."""
    v = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= kappa or norm == 0:
        return np.zeros_like(v)
    return (1.0 - kappa / norm) * v


def _prox_group_rows(v: np.ndarray, kappa: float) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    scale = np.maximum(1.0 - kappa / np.where(norms > 0, norms, 1.0), 0.0)
    return v * scale


def _orbit_rep(n: int) -> np.ndarray:
    """Flat index of the sorted representative of every ``(k, i, j)``.

    Copying values from the representative makes six-way symmetry exact,
    whatever the rounding of the average.
    """
    k, i, j = np.sort(np.indices((n, n, n)).reshape(3, -1), axis=0)
    return (k * n + i) * n + j


class _Problem:
    """Data, masks and groups of one instance in the stacked ``[H1, H2]`` layout.

    Only structural settings (masks, symmetry flags) are taken from the
    config here, so one problem serves a whole hyperparameter grid.
    """

    def __init__(self, signals: SignalMatrix, cfg: SolveConfig):
        x = signals.x
        n, r = x.shape
        if n < 3:
            raise ValueError(f"need at least 3 nodes, got n={n}")
        self.n, self.r = n, r
        self.width = n + n * n
        self.symmetric_h1 = cfg.symmetric_h1
        self.symmetric_h2 = cfg.symmetric_h2
        masks = default_masks(n) if cfg.masks is None else cfg.masks
        if masks.n != n:
            raise ValueError(f"masks are for n={masks.n}, data has n={n}")
        self.masks = masks
        self.m = np.vstack([x, khatri_rao_lift(x)])
        self.target = x - signals.v_or_zero()
        inactive = np.hstack([masks.b1, masks.b2]).astype(bool)
        # a coordinate tied by symmetry to a masked one is masked as well
        self.inactive = self.symmetrize(inactive.astype(float)) > 0
        self.active = ~self.inactive
        self.groups: GroupIndex = group_index(n, masks)
        size = n * self.width
        self.size = size
        # padding slots of custom-masked groups point at a sink past the end
        self.flat = np.where(self.groups.valid, self.groups.flat, size)

    def matches(self, cfg: SolveConfig) -> bool:
        masks = default_masks(self.n) if cfg.masks is None else cfg.masks
        return (
            cfg.symmetric_h1 == self.symmetric_h1
            and cfg.symmetric_h2 == self.symmetric_h2
            and np.array_equal(masks.b1, self.masks.b1)
            and np.array_equal(masks.b2, self.masks.b2)
        )

    def penalty_weights(self, cfg: SolveConfig) -> np.ndarray:
        n = self.n
        return np.hstack([np.full((n, n), cfg.alpha), np.full((n, n * n), cfg.beta)])

    def symmetrize(self, h: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the symmetry subspace selected by the config."""
        n = self.n
        if not (self.symmetric_h1 or self.symmetric_h2):
            return h
        h = h.copy()
        if self.symmetric_h1:
            h1 = h[:, :n]
            h[:, :n] = 0.5 * (h1 + h1.T)
        if self.symmetric_h2:
            cube = h[:, n:].reshape(n, n, n)
            avg = sum(cube.transpose(p) for p in permutations(range(3))) / 6.0
            h[:, n:] = avg.ravel()[_orbit_rep(n)].reshape(n, n * n)
        return h

    def project(self, h: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the feasible set."""
        return np.where(self.active, np.maximum(self.symmetrize(h), 0.0), 0.0)

    def gather(self, h: np.ndarray) -> np.ndarray:
        return np.append(h.ravel(), 0.0)[self.flat]

    def scatter(self, zg: np.ndarray) -> np.ndarray:
        out = np.bincount(self.flat.ravel(), weights=zg.ravel(), minlength=self.size + 1)
        return out[: self.size].reshape(self.n, self.width)

    def objective(self, h: np.ndarray, lam: np.ndarray, gamma: float) -> float:
        cols = np.flatnonzero(h.any(axis=0))
        res = self.target - h[:, cols] @ self.m[cols]
        val = float(np.sum(res * res)) + float(np.sum(lam * np.abs(h)))
        if gamma > 0 and len(self.flat):
            val += gamma * float(np.linalg.norm(self.gather(h), axis=1).sum())
        return val

    def report_kernels(self, h: np.ndarray) -> tuple[PairwiseKernel, TupleKernel]:
        n = self.n
        return (
            PairwiseKernel(h[:, :n], symmetric=self.symmetric_h1),
            TupleKernel(h[:, n:], tuple_symmetric=self.symmetric_h2),
        )


def _as_signals(x) -> SignalMatrix:
    if isinstance(x, SignalMatrix):
        return x
    return SignalMatrix(np.asarray(x, dtype=float))


def objective(x, y, v, h1, h2, cfg: SolveConfig) -> float:
    """Value of the convex objective at ``(h1, h2)``; ``v=None`` means zero."""
    x = np.asarray(getattr(x, "x", x), dtype=float)
    n, r = x.shape
    y = np.asarray(y, dtype=float)
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if y.shape != (n * n, r) or h1.shape != (n, n) or h2.shape != (n, n * n):
        raise ValueError(
            f"inconsistent shapes: x {x.shape}, y {y.shape}, h1 {h1.shape}, h2 {h2.shape}"
        )
    res = x - h1 @ x - h2 @ y
    if v is not None:
        v = np.asarray(v, dtype=float)
        if v.shape != x.shape:
            raise ValueError(f"exogenous term shape {v.shape} != signal shape {x.shape}")
        res = res - v
    val = float(np.sum(res * res))
    val += cfg.alpha * float(np.abs(h1).sum()) + cfg.beta * float(np.abs(h2).sum())
    if cfg.gamma > 0 and n >= 3:
        masks = default_masks(n) if cfg.masks is None else cfg.masks
        gi = group_index(n, masks)
        stacked = np.append(np.hstack([h1, h2]).ravel(), 0.0)
        val += cfg.gamma * float(np.linalg.norm(stacked[gi.flat], axis=1).sum())
    return val


class _RowSolver:
    """Solves the base update ``(2 G_k + rho D_k) w_k = b_k`` for every row ``k``.

    ``G_k`` is the Gram matrix of the lifted signals restricted to the
    active coordinates of row ``k`` and ``D_k`` the diagonal of consensus
    multiplicities (one for the elementwise copy plus one per group holding
    the coordinate). In the variable ``D_k^1/2 w`` the system matrix is
    ``2 D^-1/2 G D^-1/2 + rho I``, whose eigenvectors are computed once, so
    changing ``rho`` is free. Lifted rows that coincide (the products
    ``x_i x_j`` and ``x_j x_i``) are folded together first, which halves the
    eigenproblem; directions outside the kept spectrum only see ``1 / rho``.
    """

    def __init__(self, prob: _Problem, counts: np.ndarray, workers: int = 1):
        n = prob.n
        self.n, self.width = n, prob.width
        gram_cross = prob.target @ prob.m.T
        self.rows = []
        tops = []
        for k in range(n):
            a = np.flatnonzero(prob.active[k])
            d = 1.0 / np.sqrt(1.0 + counts[k, a])
            uniq, fold = np.unique(prob.m[a], axis=0, return_inverse=True)
            fold = fold.ravel()
            s_isqrt = 1.0 / np.sqrt(np.bincount(fold, weights=d * d))
            lifted = uniq / s_isqrt[:, None]
            lam, vec = np.linalg.eigh(lifted @ lifted.T)
            tops.append(lam[-1] if len(lam) else 0.0)
            self.rows.append([a, d, 2.0 * gram_cross[k, a] * d, fold, s_isqrt, lam, vec])
        top = max(tops)
        for row in self.rows:
            lam, vec = row[5], row[6]
            keep = int(np.sum(lam > 1e-12 * top)) if top > 0 else 0
            row[5] = 2.0 * lam[len(lam) - keep:]
            row[6] = np.ascontiguousarray(vec[:, len(lam) - keep:])
        bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
        self.chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        self.pool = ThreadPoolExecutor(workers) if workers > 1 else None
        self.rho = None

    def refactor(self, rho: float) -> None:
        self.rho = rho
        self.shrink = [1.0 / (row[5] + rho) - 1.0 / rho for row in self.rows]

    def _solve_rows(self, ks, rhs_dev, out):
        rho = self.rho
        for k in ks:
            a, d, cross, fold, s_isqrt, _, vec = self.rows[k]
            b = cross + rho * rhs_dev[k, a] * d
            proj = s_isqrt * np.bincount(fold, weights=d * b, minlength=len(s_isqrt))
            back = s_isqrt * (vec @ ((proj @ vec) * self.shrink[k]))
            out[k, a] = d * (b / rho + d * back[fold])

    def solve(self, rhs_dev: np.ndarray) -> np.ndarray:
        """Return ``W`` for the right-hand side ``2 C + rho * rhs_dev``."""
        out = np.zeros((self.n, self.width))
        if self.pool is None:
            for ks in self.chunks:
                self._solve_rows(ks, rhs_dev, out)
        else:
            list(self.pool.map(lambda ks: self._solve_rows(ks, rhs_dev, out), self.chunks))
        return out

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None


class _Admm:
    def __init__(self, prob: _Problem, workers: int = 1):
        self.prob = prob
        gv = prob.groups.valid
        self.counts = np.bincount(prob.flat.ravel(), minlength=prob.size + 1)[: prob.size]
        self.counts = self.counts.reshape(prob.n, prob.width)
        self.sqrt_p = math.sqrt(int(prob.active.sum()) + int(gv.sum()))
        self.sqrt_n = math.sqrt(int(prob.active.sum()))
        self.rows = _RowSolver(prob, self.counts, workers)
        # typical curvature of the least-squares term per consensus copy
        energy = np.sum(prob.m * prob.m, axis=1)
        a = prob.active
        self.scale = float(np.mean((energy[None, :] / (1.0 + self.counts))[a])) if a.any() else 1.0
        if not self.scale > 0:
            self.scale = 1.0
        self.state = None

    def close(self):
        self.rows.close()

    def run(self, cfg: SolveConfig, init=None, resume: bool = False) -> SolveReport:
        """One ADMM solve; ``resume`` restarts from the full state of the last run."""
        prob, rows = self.prob, self.rows
        valid = prob.groups.valid
        lam = prob.penalty_weights(cfg)

        if resume and self.state is not None:
            z1, zg, u1, ug, rho = (a.copy() if isinstance(a, np.ndarray) else a for a in self.state)
        else:
            z1 = np.zeros((prob.n, prob.width))
            if init is not None:
                h1, h2 = (init.h1, init.h2) if isinstance(init, SolveReport) else init
                z1 = prob.project(np.hstack([np.asarray(h1, float), np.asarray(h2, float)]))
            zg = prob.gather(z1) * valid
            u1 = np.zeros_like(z1)
            ug = np.zeros_like(zg)
            rho = cfg.rho * self.scale
        rows.refactor(rho)
        relax = cfg.relax

        best_h, best_obj = z1, prob.objective(z1, lam, cfg.gamma)
        trace = []
        converged = False
        r_norm = s_norm = float("inf")
        it = 0
        for it in range(1, cfg.max_iter + 1):
            w = rows.solve(z1 - u1 + prob.scatter(zg - ug))
            wg = prob.gather(w)

            z1_old, zg_old = z1, zg
            w1r = relax * w + (1.0 - relax) * z1_old
            wgr = relax * wg + (1.0 - relax) * zg_old
            z1 = np.maximum(prob.symmetrize(w1r + u1) - lam / rho, 0.0)
            z1[prob.inactive] = 0.0
            zg = _prox_group_rows(wgr + ug, cfg.gamma / rho) * valid
            u1 += w1r - z1
            ug += wgr - zg

            r_norm = math.sqrt(float(np.sum((w - z1) ** 2) + np.sum((wg - zg) ** 2)))
            s_norm = rho * float(np.linalg.norm((z1 - z1_old) + prob.scatter(zg - zg_old)))
            pri_scale = math.sqrt(
                max(float(np.sum(w * w) + np.sum(wg * wg)), float(np.sum(z1 * z1) + np.sum(zg * zg)))
            )
            dual_scale = rho * float(np.linalg.norm(u1 + prob.scatter(ug)))
            eps_pri = self.sqrt_p * cfg.tol_abs + cfg.tol_rel * pri_scale
            eps_dual = self.sqrt_n * cfg.tol_abs + cfg.tol_rel * dual_scale

            obj = prob.objective(z1, lam, cfg.gamma)
            trace.append(obj)
            if obj <= best_obj:
                best_h, best_obj = z1, obj

            if r_norm <= eps_pri and s_norm <= eps_dual:
                converged = True
                break

            if cfg.adapt_rho and it % 10 == 0:
                # balance residuals relative to their own scales
                r_rel = r_norm / max(pri_scale, 1e-300)
                s_rel = s_norm / max(dual_scale, 1e-300)
                factor = 1.0
                if r_rel > 10.0 * s_rel:
                    factor = 2.0
                elif s_rel > 10.0 * r_rel:
                    factor = 0.5
                if factor != 1.0:
                    rho *= factor
                    u1 /= factor
                    ug /= factor
                    rows.refactor(rho)

        self.state = (z1, zg, u1, ug, rho)
        if not converged:
            log.info("ADMM stopped at max_iter=%d (r=%.3g, s=%.3g)", cfg.max_iter, r_norm, s_norm)
        h1, h2 = prob.report_kernels(best_h)
        return SolveReport(
            h1=h1,
            h2=h2,
            objective=best_obj,
            iterations=it,
            primal_residual=r_norm,
            dual_residual=s_norm,
            converged=converged,
            objective_trace=np.array(trace),
            rho=rho,
        )


def solve(x, cfg: SolveConfig | None = None, init=None) -> SolveReport:
    """Estimate ``(H1, H2)`` by consensus ADMM with residual balancing.

    Parameters
    ----------
    x : SignalMatrix or array_like
        Observations; a missing exogenous term is taken as zero.
    cfg : SolveConfig, optional
    init : SolveReport or tuple of arrays, optional
        Warm start for the primal variables; duals restart at zero.

    Returns
    -------
    SolveReport
        The best feasible iterate seen. ``converged`` is False when
        ``max_iter`` was reached before both residual tests passed.
    """
    cfg = SolveConfig() if cfg is None else cfg
    admm = _Admm(_Problem(_as_signals(x), cfg), cfg.workers)
    try:
        return admm.run(cfg, init)
    finally:
        admm.close()


def solve_path(x, configs, warm_start: bool = True) -> list[SolveReport]:
    """Solve a sequence of related problems on the same data.

    The factorisation is shared and, with ``warm_start``, each solve starts
    from the previous solution. All configs must agree on masks and symmetry.
    """
    configs = list(configs)
    if not configs:
        return []
    signals = _as_signals(x)
    prob = _Problem(signals, configs[0])
    if not all(prob.matches(c) for c in configs):
        raise ValueError("configs in a path must share masks and symmetry flags")
    admm = _Admm(prob, configs[0].workers)
    out = []
    try:
        for cfg in configs:
            out.append(admm.run(cfg, resume=warm_start))
    finally:
        admm.close()
    return out


def reference_solve(x, cfg: SolveConfig | None = None, iterations: int = 100_000,
                    step_scale: float = 1.0) -> SolveReport:
    """Projected subgradient descent with steps ``c / sqrt(t)``.

    Slow and only meant for small instances (``n <= 8``). ``c`` is
    ``step_scale`` divided by the Lipschitz constant of the least-squares
    gradient. Shares nothing with :func:`solve` except :func:`objective`.
    The best iterate is returned; ``objective_trace`` holds the running best
    value, and ``converged`` is always False since there is no certificate.
    """
    cfg = SolveConfig() if cfg is None else cfg
    signals = _as_signals(x)
    xs = signals.x
    n = xs.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 nodes, got n={n}")
    masks = default_masks(n) if cfg.masks is None else cfg.masks
    if masks.n != n:
        raise ValueError(f"masks are for n={masks.n}, data has n={n}")
    y = khatri_rao_lift(xs)
    v = signals.v
    target = xs if v is None else xs - v

    # H1 and H2 are kept as separate blocks; g* are the two Gram blocks.
    g11, g12, g22 = xs @ xs.T, xs @ y.T, y @ y.T
    c1, c2 = target @ xs.T, target @ y.T
    const = float(np.sum(target ** 2))
    lip = 2.0 * float(np.linalg.eigvalsh(np.block([[g11, g12], [g12.T, g22]]))[-1])
    step0 = step_scale / lip if lip > 0 else 0.0

    keep1 = masks.b1 == 0
    keep2 = masks.b2 == 0
    groups = enumerate_triplet_groups(n, masks)
    g1r = [np.array([c[0] for c in g.h1_coords], dtype=int) for g in groups]
    g1c = [np.array([c[1] for c in g.h1_coords], dtype=int) for g in groups]
    g2r = [np.array([c[0] for c in g.h2_coords], dtype=int) for g in groups]
    g2c = [np.array([c[1] for c in g.h2_coords], dtype=int) for g in groups]
    if groups:
        r1, cc1 = np.concatenate(g1r), np.concatenate(g1c)
        r2, cc2 = np.concatenate(g2r), np.concatenate(g2c)
        len1 = np.array([len(a) for a in g1r])
        len2 = np.array([len(a) for a in g2r])
        owner1 = np.repeat(np.arange(len(groups)), len1)
        owner2 = np.repeat(np.arange(len(groups)), len2)
    perms = list(permutations(range(3)))

    def feasible(a1, a2):
        if cfg.symmetric_h1:
            a1 = 0.5 * (a1 + a1.T)
        if cfg.symmetric_h2:
            cube = a2.reshape(n, n, n)
            avg = sum(cube.transpose(p) for p in perms) / 6.0
            a2 = avg.ravel()[_orbit_rep(n)].reshape(n, n * n)
        # symmetry partners of masked entries are forced to zero too
        k1, k2 = keep1, keep2
        if cfg.symmetric_h1:
            k1 = k1 & k1.T
        if cfg.symmetric_h2:
            kc = k2.reshape(n, n, n)
            k2 = np.logical_and.reduce([kc.transpose(p) for p in perms]).reshape(n, n * n)
        return np.where(k1, np.maximum(a1, 0.0), 0.0), np.where(k2, np.maximum(a2, 0.0), 0.0)

    h1 = np.zeros((n, n))
    h2 = np.zeros((n, n * n))
    best = (h1, h2)
    best_obj = const
    trace = np.empty(iterations)
    for t in range(1, iterations + 1):
        p1 = h1 @ g11 + h2 @ g12.T
        p2 = h1 @ g12 + h2 @ g22
        val = const - 2.0 * float(np.sum(h1 * c1) + np.sum(h2 * c2))
        val += float(np.sum(p1 * h1) + np.sum(p2 * h2))
        val += cfg.alpha * float(h1.sum()) + cfg.beta * float(h2.sum())
        d1 = 2.0 * (p1 - c1) + cfg.alpha
        d2 = 2.0 * (p2 - c2) + cfg.beta
        if cfg.gamma > 0 and groups:
            e1, e2 = h1[r1, cc1], h2[r2, cc2]
            sq = np.bincount(owner1, e1 * e1, len(groups)) + np.bincount(owner2, e2 * e2, len(groups))
            norms = np.sqrt(sq)
            val += cfg.gamma * float(norms.sum())
            inv = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
            np.add.at(d1, (r1, cc1), cfg.gamma * e1 * inv[owner1])
            np.add.at(d2, (r2, cc2), cfg.gamma * e2 * inv[owner2])
        if val < best_obj:
            best, best_obj = (h1, h2), val
        trace[t - 1] = best_obj
        step = step0 / math.sqrt(t)
        h1, h2 = feasible(h1 - step * d1, h2 - step * d2)

    b1, b2 = best
    best_obj = objective(xs, y, v, b1, b2, cfg)
    return SolveReport(
        h1=PairwiseKernel(b1, symmetric=cfg.symmetric_h1),
        h2=TupleKernel(b2, tuple_symmetric=cfg.symmetric_h2),
        objective=best_obj,
        iterations=iterations,
        primal_residual=float("nan"),
        dual_residual=float("nan"),
        converged=False,
        objective_trace=trace,
    )
