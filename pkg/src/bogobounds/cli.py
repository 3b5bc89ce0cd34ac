"""Command-line front end: ``bogobounds {run,validate,oracle} CONFIG``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .bounds import bogoliubov_bounds
from .classical import classical_bounds
from .experiment import (
    WORKERS_ENV,
    ConfigError,
    ExperimentConfig,
    RowFailure,
    load_config,
    run_experiment,
    write_csv,
)
from .models import ModelTooLargeError, build_model

log = logging.getLogger("bogobounds")


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "backend", None) is not None:
        overrides["backend"] = args.backend
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"ok: {cfg.model.model_id}, {len(cfg.grid())} grid point(s), backend={cfg.backend}")
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.output_dir or cfg.output_dir)
    rows = run_experiment(cfg, out, workers=args.workers)
    print(f"wrote {len(rows)} row(s) to {out}")
    return 0


def cmd_oracle(args) -> int:
    """Classical direct-summation bounds for a commuting (diagonal) model, checked against the dense path."""
    cfg = _load(args)
    P = build_model(cfg.model)
    if not (P.H0.is_diagonal() and P.U.is_diagonal()):
        print("error: oracle needs diagonal H0 and U (commuting instance)", file=sys.stderr)
        return 2
    h0 = P.H0.entries.diagonal().real.tolist()
    u = P.U.entries.diagonal().real.tolist()
    rows, worst = [], 0.0
    for beta, scale in cfg.grid():
        c = classical_bounds(h0, [scale * x for x in u], beta)
        q = bogoliubov_bounds(P.scaled(scale), beta)
        worst = max(worst, abs(c.lower - q.lower), abs(c.delta_F - q.delta_F), abs(c.upper - q.upper))
        rows.append({"model_id": cfg.model.model_id, "N": cfg.model.N, "d": cfg.model.d,
                     "beta": beta, "scale": scale, "lower": c.lower, "delta_F": c.delta_F,
                     "upper": c.upper, "gap": c.upper - c.lower})
    out = Path(args.output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "oracle.csv", rows)
    print(f"wrote {len(rows)} oracle row(s) to {out / 'oracle.csv'}; "
          f"max |classical - operator| = {worst:.3e}")
    return 0 if worst <= 1e-12 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bogobounds",
        description="Interface free energy and two-sided Bogoliubov bounds for partitioned Hamiltonians.",
        epilog=f"Set {WORKERS_ENV} to override sweep.max_workers.",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="TOML experiment config")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--backend", choices=("dense", "stochastic"), help="override backend.kind")

    sp = sub.add_parser("run", help="run the sweep and write report.csv/report.json/manifest.json")
    common(sp)
    sp.add_argument("--output-dir", help="override output.dir")
    sp.add_argument("--workers", type=int, help="number of grid points evaluated concurrently")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("validate", help="parse and validate a config")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("oracle", help="classical diagonal oracle for commuting instances")
    common(sp)
    sp.add_argument("--output-dir", help="override output.dir")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RowFailure, ModelTooLargeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
