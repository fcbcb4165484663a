"""Command-line entry point.

Subcommands map onto the experiments; flags override config-file keys
(flag > file > default). The process exits 0 only when every configured
check of the run passes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, runner
from .config import build_run_config, parse_config, read_config_file
from .errors import ParameterError


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value configuration file")
    sub.add_argument("--seed", type=int, help="master seed (overrides config)")
    sub.add_argument("--workers", type=int, help="worker processes (overrides config)")
    sub.add_argument("--out", help="output directory (overrides config)")
    sub.add_argument("--no-damping", action="store_true", help="disable radiation damping")


def _build_cfg(args, experiment: str):
    overrides: dict = {"experiment": experiment}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.no_damping:
        overrides["damping"] = False
    values = read_config_file(args.config) if args.config else {}
    values.update(overrides)
    return build_run_config(values)


def _out_dir(cfg, fallback: str) -> Path:
    return Path(cfg.out_dir) if cfg.out_dir else Path(fallback)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="redosc",
        description="Charged oscillator in a synthesized classical zero-point field",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "one long trajectory with sequential statistics"),
        ("ensemble", "many short trajectories, statistics at the final time"),
        ("sweep", "ensemble energy convergence over a list of mode counts"),
        ("bench", "wall-time scaling over worker counts"),
        ("analyze", "re-analyze a stored trajectory"),
    ):
        sub = subs.add_parser(name, help=help_text)
        if name == "analyze":
            sub.add_argument("--trajectory", required=True, help="trajectory.csv path")
            sub.add_argument("--sidecar", required=True, help="trajectory.json path")
            sub.add_argument("--out", required=True, help="output directory")
        else:
            _add_common(sub)
            if name == "bench":
                sub.add_argument(
                    "--worker-counts",
                    default=",".join(str(w) for w in range(1, (os.cpu_count() or 1) + 1)),
                    help="comma-separated worker counts to time (default: 1..cpu count)",
                )
    args = parser.parse_args(argv)

    try:
        if args.command == "simulate":
            cfg = _build_cfg(args, "sequential")
            result = runner.run_sequential(cfg)
            out = runner.write_sequential_artifacts(cfg, result, _out_dir(cfg, "run_sequential"))
            for name, ok in result.checks.items():
                print(f"{name}: {'pass' if ok else 'FAIL'}")
            print(f"artifacts in {out}")
            return 0 if result.passed else 1

        if args.command == "ensemble":
            cfg = _build_cfg(args, "ensemble" if args.no_damping is False else "damping_off")
            checkpoints = 24 if not cfg.damping else 0
            result = runner.run_ensemble(cfg, checkpoints=checkpoints)
            out = runner.write_ensemble_artifacts(
                cfg, result, _out_dir(cfg, "run_ensemble"),
                experiment="damping_off" if not cfg.damping else "ensemble",
            )
            report = json.loads((out / "report.json").read_text())
            for name, ok in report["checks"].items():
                print(f"{name}: {'pass' if ok else 'FAIL'}")
            print(f"artifacts in {out}")
            return 0 if report["passed"] else 1

        if args.command == "sweep":
            cfg = _build_cfg(args, "sweep")
            result = runner.convergence_sweep(cfg)
            out = _out_dir(cfg, "run_sweep")
            out.mkdir(parents=True, exist_ok=True)
            (out / "effective_config.txt").write_text(cfg.echo_text())
            (out / "sweep.csv").write_text(result.as_table())
            print(result.as_table(), end="")
            print(f"trend_ok: {'pass' if result.trend_ok else 'FAIL'}")
            print(f"artifacts in {out}")
            return 0 if result.trend_ok else 1

        if args.command == "bench":
            cfg = _build_cfg(args, "ensemble")
            counts = [int(w) for w in args.worker_counts.split(",") if w.strip()]
            result = runner.scaling_benchmark(cfg, counts)
            out = _out_dir(cfg, "run_bench")
            out.mkdir(parents=True, exist_ok=True)
            (out / "effective_config.txt").write_text(cfg.echo_text())
            (out / "bench.csv").write_text(result.as_table())
            print(result.as_table(), end="")
            print(f"alpha: {result.alpha:.3f}  identical: {result.identical}")
            print(f"artifacts in {out}")
            return 0 if result.identical else 1

        # analyze
        traj, meta = runner.load_trajectory(args.trajectory, args.sidecar)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        params = traj.params_snapshot
        x = traj.x
        p = params.mass * traj.v
        summary = analysis.summarize((x, p), params)
        hist = analysis.Histogram.from_samples(x)
        gof = analysis.goodness_of_fit(hist, params)
        report = {
            "sigma_x": summary.sigma_x,
            "sigma_p": summary.sigma_p,
            "uncertainty_product": summary.uncertainty_product,
            "mean_energy": summary.mean_energy,
            "ks_distance": gof.ks_distance,
            "sample_count": summary.sample_count,
        }
        (out / "analysis.json").write_text(json.dumps(report, indent=2))
        print(json.dumps(report, indent=2))
        return 0

    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
