"""Command-line interface.

Subcommands:
  optimize <config> [--out DIR] [--quiet]   run the optimization loop
  homogenize <config>                       evaluate a fixed design only
  check-gradients <config>                  finite-difference gradient audit
  export <design-file> <out-dir>            voxel + bar artifacts for a design

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 infeasible termination (or a failed gradient audit).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .constraints import weight_fraction
from .driver import DriverError, check_gradients, homogenize_design, run_optimization
from .export import export_design, write_history
from .homogenization import SolverFailure
from .mma import MmaSubproblemError
from .projection import effective_densities
from .symmetry import reflect_to_reference


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trusscell", description="Multi-material truss-lattice unit-cell design")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run the optimization loop from a config file")
    p_opt.add_argument("config")
    p_opt.add_argument("--out", default=None, help="output directory (default: config key out_dir, else <config>_out)")
    p_opt.add_argument("--quiet", action="store_true", help="suppress per-iteration console output")

    p_hom = sub.add_parser("homogenize", help="evaluate the configured design without optimizing")
    p_hom.add_argument("config")

    p_fd = sub.add_parser("check-gradients", help="audit analytic gradients against central differences")
    p_fd.add_argument("config")

    p_exp = sub.add_parser("export", help="write voxel densities and the bar list for a design file")
    p_exp.add_argument("design_file")
    p_exp.add_argument("out_dir")
    return parser


def _load(path: str) -> RunConfig:
    try:
        return load_config(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc


def _resolve_out_dir(args, cfg: RunConfig) -> str:
    if args.out:
        return args.out
    if cfg.out_dir:
        return cfg.out_dir
    stem, _ = os.path.splitext(args.config)
    return stem + "_out"


def _cmd_optimize(args) -> int:
    cfg = _load(args.config)
    out_dir = _resolve_out_dir(args, cfg)
    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "run.log")
    with open(log_path, "w") as log_fh:

        def log(msg: str) -> None:
            log_fh.write(msg + "\n")
            if not args.quiet:
                print(msg)

        result = run_optimization(cfg, log=log)
        write_history(os.path.join(out_dir, "history.csv"), result.history)
        paths = export_design(out_dir, cfg, result.bars, result.rho_eff)
        summary = (
            f"stop: {result.stop_reason} after {result.iterations} iterations\n"
            f"K = {result.K:.6g}  G = {result.G:.6g}  nu = {result.nu:.6g}\n"
            f"w_f = {result.w_f:.6g}  g_d = {result.g_d:.6g}  g_m = {result.g_m:.6g}  g_n = {result.g_n:.6g}\n"
            f"feasible: {result.feasible}\n"
            f"wrote {out_dir}/history.csv, {paths['design']}, {paths['density']}, {paths['bars']}"
        )
        log(summary)
    return 0 if result.feasible else 3


def _cmd_homogenize(args) -> int:
    cfg = _load(args.config)
    ev = homogenize_design(cfg)
    np.set_printoptions(precision=6, suppress=True)
    print("effective stiffness (Voigt, engineering shear):")
    print(ev.CH)
    print(f"K = {ev.K:.6g}  G = {ev.G:.6g}  nu = {ev.nu:.6g}")
    print(f"w_f = {ev.w_f:.6g}  g_d = {ev.g_d:.6g}  g_m = {ev.g_m:.6g}  g_n(raw) = {ev.g_n:.6g}")
    return 0


def _cmd_check_gradients(args) -> int:
    cfg = _load(args.config)
    rows, passed = check_gradients(cfg)
    print(f"{'design':>6} {'quantity':<18} {'max rel err':>12} {'checked':>8} {'skipped':>8}")
    for row in rows:
        print(f"{row.design:>6} {row.quantity:<18} {row.max_rel_error:>12.3e} {row.checked:>8} {row.skipped:>8}")
    worst = max((row.max_rel_error for row in rows), default=0.0)
    print(f"worst relative error {worst:.3e} (tolerance {cfg.fd_rel_tol:g}) -> {'PASS' if passed else 'FAIL'}")
    return 0 if passed else 3


def _cmd_export(args) -> int:
    cfg = _load(args.design_file)
    if not cfg.explicit_bars:
        raise ConfigError("design file has no bar lines to export")
    bars = cfg.bars_from_explicit()
    grid, group = cfg.grid(), cfg.group()
    points = reflect_to_reference(grid.centroids, group)
    rho_eff = effective_densities(bars, points, cfg.projection_settings())
    paths = export_design(args.out_dir, cfg, bars, rho_eff)
    w_f = weight_fraction(rho_eff, grid, cfg.materials())
    print(f"w_f = {w_f:.9g}")
    print(f"wrote {paths['density']}, {paths['bars']}, {paths['design']}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "optimize":
            return _cmd_optimize(args)
        if args.command == "homogenize":
            return _cmd_homogenize(args)
        if args.command == "check-gradients":
            return _cmd_check_gradients(args)
        if args.command == "export":
            return _cmd_export(args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SolverFailure, DriverError, MmaSubproblemError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
