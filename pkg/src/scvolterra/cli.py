"""Command-line front end: ``vgr generate | infer | sweep | eval | oracle``.

Exit status is 0 when a command ran (a non-converged solve included) and 2
on any input or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .complex import extract_sc2
from .experiment import ExperimentConfig, config_entries, load_config, run_sweep, summarize, write_results
from .metrics import evaluate
from .model import generate, ingest_real
from .rips import rc_infer
from .solver import reference_solve, solve

ORACLE_MAX_N = 8
OUTPUT_ENV = "VGR_OUTPUT_DIR"

log = logging.getLogger("scvolterra")


class UsageError(Exception):
    """Bad input or configuration; maps to exit status 2."""


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    if args.out:
        path = Path(args.out)
    elif cfg is not None and cfg.output_dir:
        path = Path(cfg.output_dir)
    else:
        path = Path(os.environ.get(OUTPUT_ENV, "out"))
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from None
    return path


def _config(args) -> ExperimentConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["generator.seed"] = str(args.seed)
        if args.command == "sweep":
            overrides["sweep.seeds"] = str(args.seed)
    if getattr(args, "threads", None) is not None:
        overrides["solver.workers"] = str(args.threads)
        overrides["sweep.workers"] = str(args.threads)
    if args.command == "sweep" and args.v_known is not None:
        overrides["sweep.v_known"] = args.v_known
    return load_config(args.config, overrides)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not serialisable: {type(v).__name__}")


def _write_estimate(out: Path, h1, h2, cfg: ExperimentConfig) -> None:
    io.write_sparse_h1(out / "h1.csv", h1)
    io.write_sparse_h2(out / "h2.csv", h2)
    sc = extract_sc2(h1, h2, cfg.edge_threshold, cfg.tri_threshold)
    io.write_sc2(out / "edges.csv", out / "triangles.csv", sc)


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    inst = generate(cfg.generator)
    io.write_dense(out / "X.csv", inst.signals.x)
    io.write_dense(out / "V.csv", inst.signals.v)
    io.write_sc2(out / "edges.csv", out / "triangles.csv", inst.truth)
    io.write_sparse_h1(out / "h1.csv", inst.h1)
    io.write_sparse_h2(out / "h2.csv", inst.h2)
    _write_json(out / "manifest.json", {
        "n": cfg.generator.n,
        "r": cfg.generator.r,
        "seed": cfg.generator.seed,
        "config": config_entries(cfg),
    })
    print(f"wrote instance n={cfg.generator.n} r={cfg.generator.r} seed={cfg.generator.seed} to {out}")
    return 0


def _load_signals(args):
    signals, _ = ingest_real(args.x, args.v_known)
    return signals


def cmd_infer(args) -> int:
    cfg = _config(args)
    signals = _load_signals(args)
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    report = {"method": args.method, "n": signals.n, "r": signals.r, "v_known": signals.v is not None}
    if args.method == "vgr":
        if signals.n < 3:
            raise UsageError(f"{args.x}: need at least 3 nodes, got {signals.n}")
        rep = solve(signals, cfg.solver)
        h1, h2 = rep.h1, rep.h2
        report.update(
            objective=rep.objective, iterations=rep.iterations, converged=rep.converged,
            primal_residual=rep.primal_residual, dual_residual=rep.dual_residual, rho=rep.rho,
            alpha=cfg.solver.alpha, beta=cfg.solver.beta, gamma=cfg.solver.gamma,
        )
    else:
        _, h1, h2 = rc_infer(signals, cfg.rc)
        report.update(threshold=cfg.rc.threshold, weight_rule=cfg.rc.weight_rule)
    report["wall_time"] = time.perf_counter() - t0
    _write_estimate(out, h1, h2, cfg)
    _write_json(out / "report.json", report)
    status = "" if report.get("converged", True) else " (not converged)"
    print(f"{args.method}: n={signals.n} r={signals.r}{status}; results in {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _config(args)
    signals = _load_signals(args)
    if signals.n > ORACLE_MAX_N:
        raise UsageError(f"oracle is desk-scale only (n <= {ORACLE_MAX_N}), got n={signals.n}")
    if signals.n < 3:
        raise UsageError(f"{args.x}: need at least 3 nodes, got {signals.n}")
    out = _out_dir(args, cfg)
    t0 = time.perf_counter()
    rep = reference_solve(signals, cfg.solver, cfg.oracle_iterations, cfg.oracle_step_scale)
    _write_estimate(out, rep.h1, rep.h2, cfg)
    _write_json(out / "report.json", {
        "method": "oracle", "n": signals.n, "r": signals.r, "v_known": signals.v is not None,
        "objective": rep.objective, "iterations": rep.iterations,
        "alpha": cfg.solver.alpha, "beta": cfg.solver.beta, "gamma": cfg.solver.gamma,
        "wall_time": time.perf_counter() - t0,
    })
    print(f"oracle objective {rep.objective!r}; results in {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    rows = run_sweep(cfg)
    paths = write_results(out, rows)
    failed = sum(1 for r in rows if r.error)
    for entry in summarize(rows):
        print(
            f"{entry['method']:>3} r={entry['r']:<5d} err_h1={entry['err_h1_mean']:.4g} "
            f"err_h2={entry['err_h2_mean']:.4g} F_edges={entry['fscore_edges_mean']:.3f} "
            f"F_tri={entry['fscore_triangles_mean']:.3f}"
        )
    if failed:
        print(f"{failed} task(s) failed; see the error column of {paths['results']}")
    return 0


def _node_count(directory: Path) -> int:
    for name in ("manifest.json", "report.json"):
        p = directory / name
        if p.is_file():
            try:
                return int(json.loads(p.read_text())["n"])
            except (ValueError, KeyError, TypeError) as exc:
                raise UsageError(f"{p}: no usable node count ({exc})") from None
    raise UsageError(f"{directory}: no manifest.json or report.json giving the node count")


def cmd_eval(args) -> int:
    cfg = _config(args)
    est_dir, truth_dir = Path(args.estimate), Path(args.truth)
    n_est, n_true = _node_count(est_dir), _node_count(truth_dir)
    if n_est != n_true:
        raise UsageError(f"node counts differ: estimate n={n_est}, truth n={n_true}")
    n = n_true
    est = (io.read_sparse_h1(est_dir / "h1.csv", n), io.read_sparse_h2(est_dir / "h2.csv", n))
    ref = (io.read_sparse_h1(truth_dir / "h1.csv", n), io.read_sparse_h2(truth_dir / "h2.csv", n))
    res = evaluate(*est, *ref, cfg.edge_threshold, cfg.tri_threshold)
    payload = res.as_dict()
    line = json.dumps(payload, sort_keys=True)
    print(line)
    if args.out:
        out = _out_dir(args, cfg)
        (out / "eval.json").write_text(line + "\n")
        keys = sorted(payload)
        (out / "eval.csv").write_text(",".join(keys) + "\n" + ",".join(repr(payload[k]) for k in keys) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vgr", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="output directory"):
        sp.add_argument("--config", help="flat 'section.key = value' config file")
        sp.add_argument("--out", help=f"{out_help} (default: ${OUTPUT_ENV} or ./out)")
        sp.add_argument("--threads", type=int, help="worker count")
        return sp

    g = common(sub.add_parser("generate", help="draw a synthetic instance"))
    g.add_argument("--seed", type=int, help="override generator.seed")
    g.set_defaults(func=cmd_generate)

    for name, func, hlp in (("infer", cmd_infer, "estimate kernels from signals"),
                            ("oracle", cmd_oracle, "slow reference solve (n <= 8)")):
        sp = common(sub.add_parser(name, help=hlp))
        sp.add_argument("x", help="signal CSV (nodes x realizations)")
        sp.add_argument("--v-known", metavar="V_CSV", help="exogenous term CSV; omitted means V = 0")
        if name == "infer":
            sp.add_argument("--method", choices=("vgr", "rc"), default="vgr")
        sp.set_defaults(func=func)

    s = common(sub.add_parser("sweep", help="sample-size sweep over seeds"))
    s.add_argument("--seed", type=int, help="run a single seed")
    s.add_argument("--v-known", choices=("true", "false"), help="override sweep.v_known")
    s.set_defaults(func=cmd_sweep)

    e = common(sub.add_parser("eval", help="score an estimate directory against a truth directory"),
               out_help="also write eval.json and eval.csv here")
    e.add_argument("--estimate", required=True, help="directory holding h1.csv, h2.csv")
    e.add_argument("--truth", required=True, help="directory holding h1.csv, h2.csv")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        # io.InputError and config validation errors are ValueErrors
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
