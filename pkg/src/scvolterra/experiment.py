"""Experiment configuration, hyperparameter selection and sample-size sweeps."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .io import InputError, read_config
from .metrics import evaluate
from .model import GeneratorConfig, SignalMatrix, generate, khatri_rao_lift
from .rips import RcConfig, correlation_matrix, rc_from_correlation
from .solver import SolveConfig, solve_path

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "load_config",
    "parse_config",
    "run_sweep",
    "select_rc",
    "select_vgr",
    "summarize",
    "write_results",
]

METHODS = ("vgr", "rc")
SELECTIONS = ("truth", "holdout")


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    solver: SolveConfig = field(default_factory=SolveConfig)
    rc: RcConfig = field(default_factory=RcConfig)
    r_grid: tuple[int, ...] = (50, 100, 200, 400)
    seeds: tuple[int, ...] = tuple(range(10))
    alphas: tuple[float, ...] = (1e-3, 1e-2)
    betas: tuple[float, ...] = (1e-3, 1e-2)
    gammas: tuple[float, ...] = (1e-3, 1e-2)
    eps_grid: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(1, 20))
    methods: tuple[str, ...] = METHODS
    v_known: bool = True
    edge_threshold: float = 0.02
    tri_threshold: float = 0.02
    selection: str = "truth"
    holdout_fraction: float = 0.2
    oracle_iterations: int = 30_000
    oracle_step_scale: float = 1.0
    output_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        for name in ("r_grid", "seeds", "alphas", "betas", "gammas", "eps_grid", "methods"):
            val = tuple(getattr(self, name))
            if not val:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, val)
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if any(r < 2 for r in self.r_grid):
            raise ValueError(f"r_grid entries must be at least 2, got {self.r_grid}")
        if any(v < 0 for v in self.alphas + self.betas + self.gammas):
            raise ValueError("penalty grids must be nonnegative")
        if any(not 0 <= e <= 1 for e in self.eps_grid):
            raise ValueError("eps_grid entries must lie in [0, 1]")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}; choose from {METHODS}")
        if self.edge_threshold < 0 or self.tri_threshold < 0:
            raise ValueError("thresholds must be nonnegative")
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}, got {self.selection!r}")
        if not 0 < self.holdout_fraction < 1:
            raise ValueError(f"holdout_fraction must lie in (0, 1), got {self.holdout_fraction}")
        if self.oracle_iterations < 1 or not self.oracle_step_scale > 0:
            raise ValueError("oracle iterations and step scale must be positive")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")

    def hyper_grid(self) -> list[tuple[float, float, float]]:
        """Penalty triples ordered from strongest to weakest (warm-start order)."""
        grid = itertools.product(self.alphas, self.betas, self.gammas)
        return sorted(grid, key=lambda t: (-sum(t), tuple(-v for v in t)))


# ----------------------------------------------------------------- config I/O

def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"cannot parse {text!r} as a boolean")


def _list(conv):
    def parse(text: str):
        items = [s.strip() for s in text.replace(";", ",").split(",") if s.strip()]
        return tuple(conv(s) for s in items)
    return parse


def _seeds(text: str) -> tuple[int, ...]:
    # "0-9" is shorthand for a contiguous range
    out = []
    for part in (s.strip() for s in text.split(",") if s.strip()):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _opt_float(text: str):
    return None if text.strip().lower() in ("none", "") else float(text)


def _pair(text: str) -> tuple[float, float]:
    vals = _list(float)(text)
    if len(vals) != 2:
        raise ValueError(f"expected two numbers 'lo, hi', got {text!r}")
    return vals


_GEN_KEYS = {
    "n": int, "r": int, "edge_prob": float, "tri_fill_prob": float,
    "h1_weight_range": _pair, "h2_weight_range": _pair, "noise_std": float,
    "seed": int, "signal_dist": str, "target_ratio": _opt_float,
}
_SOLVER_KEYS = {
    "alpha": float, "beta": float, "gamma": float, "rho": float, "max_iter": int,
    "tol_abs": float, "tol_rel": float, "symmetric_h1": _bool, "symmetric_h2": _bool,
    "adapt_rho": _bool, "relax": float, "workers": int,
}
_RC_KEYS = {"threshold": float, "weight_rule": str}
# top-level ExperimentConfig fields, addressed as section.key
_TOP_KEYS = {
    "sweep.r_grid": ("r_grid", _list(int)),
    "sweep.seeds": ("seeds", _seeds),
    "sweep.methods": ("methods", _list(str)),
    "sweep.v_known": ("v_known", _bool),
    "sweep.workers": ("workers", int),
    "grid.alpha": ("alphas", _list(float)),
    "grid.beta": ("betas", _list(float)),
    "grid.gamma": ("gammas", _list(float)),
    "grid.eps": ("eps_grid", _list(float)),
    "eval.edge_threshold": ("edge_threshold", float),
    "eval.tri_threshold": ("tri_threshold", float),
    "selection.mode": ("selection", str),
    "selection.holdout_fraction": ("holdout_fraction", float),
    "oracle.iterations": ("oracle_iterations", int),
    "oracle.step_scale": ("oracle_step_scale", float),
    "output.dir": ("output_dir", str),
}


def parse_config(entries: dict[str, str], source: str = "<config>") -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from flat ``section.key`` strings.

    Unknown keys and unparsable values raise :class:`InputError`.
    """
    sections = {"generator": ({}, _GEN_KEYS), "solver": ({}, _SOLVER_KEYS), "rc": ({}, _RC_KEYS)}
    top = {}
    for key, raw in entries.items():
        try:
            if key in _TOP_KEYS:
                name, conv = _TOP_KEYS[key]
                top[name] = conv(raw)
                continue
            sec, _, sub = key.partition(".")
            if sec not in sections or sub not in sections[sec][1]:
                raise InputError(f"{source}: unknown key {key!r}")
            sections[sec][0][sub] = sections[sec][1][sub](raw)
        except InputError:
            raise
        except ValueError as exc:
            raise InputError(f"{source}: bad value for {key!r}: {exc}") from None
    try:
        return ExperimentConfig(
            generator=GeneratorConfig(**sections["generator"][0]),
            solver=SolveConfig(**sections["solver"][0]),
            rc=RcConfig(**sections["rc"][0]),
            **top,
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"{source}: {exc}") from None


def load_config(path=None, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    entries = read_config(path) if path is not None else {}
    entries.update(overrides or {})
    return parse_config(entries, str(path) if path is not None else "<defaults>")


def config_entries(cfg: ExperimentConfig) -> dict[str, str]:
    """Flat ``section.key`` view of a config (used for manifests)."""
    out = {}
    for sec, obj, keys in (("generator", cfg.generator, _GEN_KEYS),
                           ("solver", cfg.solver, _SOLVER_KEYS), ("rc", cfg.rc, _RC_KEYS)):
        for k in keys:
            out[f"{sec}.{k}"] = _fmt(getattr(obj, k))
    for key, (name, _) in _TOP_KEYS.items():
        if getattr(cfg, name) is not None:
            out[key] = _fmt(getattr(cfg, name))
    return out


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(a) for a in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


# ------------------------------------------------------------------ selection

@dataclass(frozen=True)
class ResultRow:
    method: str
    n: int
    r: int
    seed: int
    v_known: bool
    selection: str
    alpha: float = math.nan
    beta: float = math.nan
    gamma: float = math.nan
    eps: float = math.nan
    err_h1: float = math.nan
    err_h2: float = math.nan
    fscore_edges: float = math.nan
    fscore_triangles: float = math.nan
    iterations: int = 0
    converged: bool = True
    wall_time: float = 0.0
    error: str = ""


def _solver_grid(cfg: ExperimentConfig) -> list[SolveConfig]:
    return [dataclasses.replace(cfg.solver, alpha=a, beta=b, gamma=g) for a, b, g in cfg.hyper_grid()]


def _truth_key(res, pen):
    # higher F-scores first; ties go to the weaker penalty
    return (res.fscore_edges, res.fscore_triangles, -sum(pen))


def _holdout_split(r: int, fraction: float, seed: int):
    perm = np.random.default_rng(seed).permutation(r)
    n_test = max(1, int(round(fraction * r)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def _holdout_loss(sig: SignalMatrix, h1, h2) -> float:
    res = sig.x - np.asarray(h1) @ sig.x - np.asarray(h2) @ khatri_rao_lift(sig.x) - sig.v_or_zero()
    return float(np.sum(res * res))


def select_vgr(signals: SignalMatrix, cfg: ExperimentConfig, truth=None, seed: int = 0):
    """Pick penalties on the grid and return ``(penalties, report, eval_or_None)``.

    With ``selection == "truth"`` each grid point is scored against the true
    kernels ``truth = (h1, h2)``. Otherwise columns are split into training
    and held-out parts, the held-out model residual picks the penalties and
    the chosen penalties are refitted on all columns.
    """
    grid = _solver_grid(cfg)
    pens = [(c.alpha, c.beta, c.gamma) for c in grid]
    if cfg.selection == "truth":
        if truth is None:
            raise ValueError("truth selection needs ground-truth kernels")
        reports = solve_path(signals, grid)
        best = None
        for pen, rep in zip(pens, reports):
            res = evaluate(rep.h1, rep.h2, *truth, cfg.edge_threshold, cfg.tri_threshold)
            key = _truth_key(res, pen)
            if best is None or key > best[0]:
                best = (key, pen, rep, res)
        return best[1], best[2], best[3]
    train, test = _holdout_split(signals.r, cfg.holdout_fraction, seed)
    reports = solve_path(signals.columns(train), grid)
    held = signals.columns(test)
    losses = [_holdout_loss(held, rep.h1, rep.h2) for rep in reports]
    i = min(range(len(pens)), key=lambda k: (losses[k], -sum(pens[k])))
    rep = solve_path(signals, [grid[i]])[0]
    res = None if truth is None else evaluate(rep.h1, rep.h2, *truth, cfg.edge_threshold, cfg.tri_threshold)
    return pens[i], rep, res


def select_rc(signals: SignalMatrix, cfg: ExperimentConfig, truth=None):
    """Pick the correlation threshold on ``eps_grid``; returns ``(eps, (sc, h1, h2), eval)``.

    Scored by edge F-score against ``truth``; without truth the configured
    ``rc.threshold`` is used as is.
    """
    corr = correlation_matrix(signals.x)
    if truth is None:
        out = rc_from_correlation(corr, cfg.rc)
        return cfg.rc.threshold, out, None
    best = None
    for eps in cfg.eps_grid:
        out = rc_from_correlation(corr, dataclasses.replace(cfg.rc, threshold=eps))
        res = evaluate(out[1], out[2], *truth, cfg.edge_threshold, cfg.tri_threshold)
        # ties go to the larger threshold (sparser complex)
        key = (res.fscore_edges, res.fscore_triangles, eps)
        if best is None or key > best[0]:
            best = (key, eps, out, res)
    return best[1], best[2], best[3]


# ---------------------------------------------------------------------- sweep

def _task(cfg: ExperimentConfig, seed: int, r: int, method: str) -> ResultRow:
    gen = dataclasses.replace(cfg.generator, r=r, seed=seed)
    sel = cfg.selection if method == "vgr" else "truth"
    base = dict(method=method, n=gen.n, r=r, seed=seed, v_known=cfg.v_known, selection=sel)
    t0 = time.perf_counter()
    try:
        inst = generate(gen)
        signals = inst.signals if cfg.v_known else inst.signals.without_v()
        truth = (inst.h1, inst.h2)
        if method == "vgr":
            (a, b, g), rep, res = select_vgr(signals, cfg, truth, seed)
            extra = dict(alpha=a, beta=b, gamma=g, iterations=rep.iterations, converged=rep.converged)
        else:
            eps, _, res = select_rc(signals, cfg, truth)
            extra = dict(eps=eps)
        return ResultRow(
            **base, **extra,
            err_h1=res.err_h1, err_h2=res.err_h2,
            fscore_edges=res.fscore_edges, fscore_triangles=res.fscore_triangles,
            wall_time=time.perf_counter() - t0,
        )
    except Exception as exc:  # recorded per row; the sweep carries on
        return ResultRow(**base, converged=False, wall_time=time.perf_counter() - t0,
                         error=f"{type(exc).__name__}: {exc}")


def _task_star(args):
    return _task(*args)


def _row_key(row: ResultRow):
    return (METHODS.index(row.method), row.r, row.seed)


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[ResultRow]:
    """Run every ``(seed, r, method)`` task and return rows in a fixed order.

    Tasks are independent; with ``workers > 1`` they run in a process pool
    and the result order does not depend on completion order.
    """
    workers = cfg.workers if workers is None else workers
    tasks = [(cfg, s, r, m) for m in cfg.methods for r in cfg.r_grid for s in cfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_task_star, tasks))
    else:
        rows = [_task(*t) for t in tasks]
    return sorted(rows, key=_row_key)


SUMMARY_FIELDS = ("err_h1", "err_h2", "fscore_edges", "fscore_triangles")


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Per ``(method, r)`` means and standard deviations, NaNs ignored."""
    out = []
    keys = sorted({(r.method, r.r) for r in rows}, key=lambda k: (METHODS.index(k[0]), k[1]))
    for method, r in keys:
        group = [row for row in rows if row.method == method and row.r == r]
        entry = {"method": method, "r": r, "count": sum(1 for g in group if not g.error)}
        for f in SUMMARY_FIELDS:
            vals = np.array([getattr(g, f) for g in group], dtype=float)
            vals = vals[np.isfinite(vals)]
            entry[f"{f}_mean"] = float(vals.mean()) if len(vals) else math.nan
            entry[f"{f}_std"] = float(vals.std()) if len(vals) else math.nan
        out.append(entry)
    return out


RESULT_FIELDS = [f.name for f in dataclasses.fields(ResultRow) if f.name != "wall_time"]


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(out_dir, rows: list[ResultRow]) -> dict[str, Path]:
    """Write ``results.csv``, ``summary.csv`` and ``timings.csv`` into ``out_dir``.

    Wall times live in their own file so ``results.csv`` and ``summary.csv``
    are identical across reruns of the same config.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {k: out_dir / f"{k}.csv" for k in ("results", "summary", "timings")}
    with open(paths["results"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for row in rows:
            w.writerow([_cell(getattr(row, f)) for f in RESULT_FIELDS])
    summary = summarize(rows)
    with open(paths["summary"], "w", newline="") as fh:
        fields = ["method", "r", "count"] + [f"{f}_{s}" for f in SUMMARY_FIELDS for s in ("mean", "std")]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for entry in summary:
            w.writerow([_cell(entry[f]) for f in fields])
    with open(paths["timings"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "r", "seed", "wall_time"])
        for row in rows:
            w.writerow([row.method, row.r, row.seed, f"{row.wall_time:.3f}"])
    return paths
