"""Command-line entry point: ``ris-cellfree {optimize,compare,validate,sweep}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import yaml

from .config import ALGORITHMS, ConfigError, ExperimentSpec, desk_profile, dump_spec, load_spec
from .evolution.trace import fmt
from .harness import (
    emit_outputs,
    provenance_header,
    run_experiment,
    run_sweep,
    validate_closed_form,
)

log = logging.getLogger("ris_cellfree")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ERROR = 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML config; defaults to the built-in desk profile")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="worker processes; affects speed only")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-cellfree", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="optimize one topology with one algorithm")
    _common(p)
    p.add_argument("--algorithm", choices=ALGORITHMS)

    p = sub.add_parser("compare", help="compare algorithms over a batch of topologies")
    _common(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, action="append", help="repeatable; default from config")
    p.add_argument("--topologies", type=int)

    p = sub.add_parser("validate", help="Monte Carlo certification of the closed-form SINR")
    _common(p)
    p.add_argument("--draws", type=int, help="Monte Carlo draws (default from config)")

    p = sub.add_parser("sweep", help="repeat the comparison over values of one system parameter")
    _common(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, action="append")
    p.add_argument("--topologies", type=int)
    p.add_argument("--parameter", help="SystemConfig field to sweep")
    p.add_argument("--values", type=yaml.safe_load, help="YAML list, e.g. '[0, 0.5, 1]'")
    return parser


def resolve_spec(args) -> ExperimentSpec:
    spec = load_spec(args.config) if args.config else desk_profile()
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    if getattr(args, "topologies", None) is not None:
        changes["num_topologies"] = args.topologies
    algorithm = getattr(args, "algorithm", None)
    if isinstance(algorithm, list):
        changes["algorithms"] = tuple(algorithm)
    elif isinstance(algorithm, str):
        changes["algorithms"] = (algorithm,)
    if getattr(args, "parameter", None) is not None:
        if args.values is None:
            raise ConfigError("--parameter needs --values")
        changes["sweep"] = (args.parameter, tuple(args.values))
    return spec.replace(**changes) if changes else spec


def _optimize(spec: ExperimentSpec, args) -> int:
    if args.algorithm is None:
        spec = spec.replace(algorithms=(spec.optimizer.algorithm,))
    spec = spec.replace(num_topologies=1)
    result = run_experiment(spec)
    emit_outputs(result, spec.output_dir)
    run = next(iter(result.runs.values()))
    path = Path(spec.output_dir) / "best_theta.csv"
    with path.open("w", newline="") as fh:
        for line in provenance_header(spec, f"best phase vector {run.algorithm}").splitlines():
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("element", "theta_rad"))
        writer.writerows((n, fmt(v)) for n, v in enumerate(run.trace.best_theta))
    print(f"{run.algorithm}: objective {run.objective:.6g} Mbps after {run.trace.evaluations} evaluations")
    return EXIT_OK


def _compare(spec: ExperimentSpec, args) -> int:
    result = run_experiment(spec, workers=args.threads)
    emit_outputs(result, spec.output_dir)
    for alg, stats in result.summary()["algorithms"].items():
        print(f"{alg:>7}: median {stats['median_mbps']:.6g} Mbps, mean {stats['mean_mbps']:.6g} Mbps")
    return EXIT_OK


def _validate(spec: ExperimentSpec, args) -> int:
    report = validate_closed_form(spec, num_draws=args.draws)
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "validation.csv").write_text(report.to_csv(provenance_header(spec, "closed-form validation")))
    for r in report.rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"user {r.user}: closed {r.closed_form:.6g} empirical {r.empirical:.6g} rel.err {r.rel_error:.4f} {status}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _sweep(spec: ExperimentSpec, args) -> int:
    if spec.sweep is None:
        raise ConfigError("no sweep configured; pass --parameter and --values or set experiment.sweep")
    run_sweep(spec, spec.output_dir, workers=args.threads)
    print(f"sweep written to {spec.output_dir}")
    return EXIT_OK


COMMANDS = {"optimize": _optimize, "compare": _compare, "validate": _validate, "sweep": _sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = resolve_spec(args)
        log.debug("resolved spec:\n%s", dump_spec(spec))
        return COMMANDS[args.command](spec, args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
