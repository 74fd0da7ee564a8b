"""``nilspectra`` command line.

Exit codes: 0 all ceilings pass, 1 a ceiling is violated, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..errors import InfeasibleFitError, NumericalError
from ..nilpotent import Representation, validate_algebra
from ..schrodinger import DegenerateModelError, SchrodingerModel, degeneracy_directions
from .config import ExperimentConfig, build_model, load_config
from .experiments import (
    run_count_experiment,
    run_heat_experiment,
    run_sobolev_check,
    run_sweep,
    run_volume,
    write_report,
)

EXIT_PASS, EXIT_CEILING, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("nilspectra")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="experiment TOML file")
    common.add_argument("--seed", type=int, help="override sampling.seed")
    common.add_argument("--out", type=Path, help="override output.dir")
    common.add_argument("--samples", type=int, help="override sampling.samples")
    common.add_argument("--ceiling-c", type=float, help="override ceiling_c")
    common.add_argument("--workers", type=int, help="override sampling.workers")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nilspectra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check config, algebra and degeneracy")
    count = sub.add_parser("count", parents=[common], help="N(lambda) against N0(lambda)")
    count.add_argument("--dump-matrix", type=Path, help="write the grid operator in Matrix Market format")
    sub.add_parser("heat", parents=[common], help="Z(t) against Z0(t)")
    sub.add_parser("volume", parents=[common], help="N0(lambda) only")
    sub.add_parser("sobolev", parents=[common], help="weighted Sobolev ratio ensemble")
    sweep = sub.add_parser("sweep", parents=[common], help="count (or heat, sobolev) over sweep.parameters")
    sweep.add_argument("--kind", choices=("count", "heat", "sobolev"), default="count")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    sampling = cfg.sampling
    if args.seed is not None:
        sampling = replace(sampling, seed=args.seed)
    if args.samples is not None:
        if args.samples < 1000:
            raise ValueError("--samples must be at least 1000")
        sampling = replace(sampling, samples=args.samples)
    if args.workers is not None:
        if args.workers < 1:
            raise ValueError("--workers must be positive")
        sampling = replace(sampling, workers=args.workers)
    cfg = replace(cfg, sampling=sampling)
    if args.out is not None:
        cfg = replace(cfg, output_dir=str(args.out))
    if args.ceiling_c is not None:
        if args.ceiling_c < 1:
            raise ValueError("--ceiling-c must be at least 1")
        cfg = replace(cfg, ceiling_c=args.ceiling_c)
    return cfg


def _validate(cfg: ExperimentConfig) -> dict:
    model = build_model(cfg.model)
    info: dict = {"model_kind": cfg.model["kind"]}
    if isinstance(model, SchrodingerModel):
        dirs = degeneracy_directions(model)
        if dirs:
            raise DegenerateModelError(dirs)
        info.update(n=model.n, r=model.r, degenerate=False)
    elif isinstance(model, Representation):
        validate_algebra(model.algebra).raise_if_failed()
        model.check_homomorphism().raise_if_failed()
        info.update(name=model.name, n=model.n, step=model.r, dimension=model.algebra.dim)
    return info


def _finish(report, cfg: ExperimentConfig, stem: str) -> int:
    csv_path, json_path = write_report(report, cfg.output_dir, stem)
    fitted = "n/a" if report.fitted_C is None else f"{report.fitted_C:.6g}"
    print(f"{report.kind}: fitted C = {fitted}, ceiling = {cfg.ceiling_c:g}, pass = {report.passed}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_PASS if report.passed else EXIT_CEILING


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "validate":
            print(json.dumps({"valid": True, **_validate(cfg)}, sort_keys=True))
            return EXIT_PASS
        if args.command == "count":
            return _finish(run_count_experiment(cfg, dump_matrix=args.dump_matrix), cfg, "count")
        if args.command == "heat":
            return _finish(run_heat_experiment(cfg), cfg, "heat")
        if args.command == "volume":
            return _finish(run_volume(cfg), cfg, "volume")
        if args.command == "sobolev":
            return _finish(run_sobolev_check(cfg), cfg, "sobolev")
        summary, members = run_sweep(cfg, args.kind)
        for p, rep in members.items():
            write_report(rep, cfg.output_dir, f"sweep_{args.kind}_{np.format_float_positional(p, trim='-')}")
        return _finish(summary, cfg, f"sweep_{args.kind}")
    except InfeasibleFitError as exc:
        print(f"ceiling violated: {exc}", file=sys.stderr)
        return EXIT_CEILING
    except (ValueError, OSError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
