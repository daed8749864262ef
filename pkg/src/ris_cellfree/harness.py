"""Experiment runner: topology batches, algorithm comparison, sweeps and validation.

Output CSVs start with ``#`` comment lines carrying the resolved config and
seeds; ``load_spec_from_output`` reads them back. Wall-clock timings go to a
separate ``timing.yaml`` so every other file is byte-identical across reruns.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from .config import ConfigError, ExperimentSpec, spec_from_dict, spec_to_dict
from .evolution.engines import run_algorithm
from .evolution.trace import TRACE_COLUMNS, OptimizationTrace, fmt
from .montecarlo import uatf_statistics
from .rates import RateModel, evaluate_objective
from .system import generate_topology

log = logging.getLogger(__name__)

VALIDATION_TOL = 0.03
_TOPOLOGY_KEY = 0
_OPTIMIZER_KEY = 1
_VALIDATION_KEY = 2


def derived_seed(master_seed: int, *keys: int) -> int:
    """Independent 32-bit seed for a ``(master_seed, *keys)`` tuple."""
    return int(np.random.SeedSequence([int(master_seed), *map(int, keys)]).generate_state(1)[0])


def topology_seed(master_seed: int, t: int) -> int:
    return derived_seed(master_seed, _TOPOLOGY_KEY, t)


def optimizer_seed(master_seed: int, t: int) -> int:
    return derived_seed(master_seed, _OPTIMIZER_KEY, t)


@dataclass
class RunResult:
    topology: int
    algorithm: str
    objective: float
    trace: OptimizationTrace
    seconds: float


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    runs: dict[tuple[int, str], RunResult] = field(default_factory=dict)

    @property
    def topologies(self) -> list[int]:
        return sorted({t for t, _ in self.runs})

    def finals(self, algorithm: str) -> np.ndarray:
        return np.array([self.runs[t, algorithm].objective for t in self.topologies if (t, algorithm) in self.runs])

    def cdf(self, algorithm: str) -> tuple[np.ndarray, np.ndarray]:
        """Sorted final objectives and their empirical CDF values ``i / n``."""
        values = np.sort(self.finals(algorithm))
        n = len(values)
        return values, np.arange(1, n + 1) / max(n, 1)

    def mean_curve(self, algorithm: str) -> list[tuple]:
        """Per-generation averages over topologies of the trace columns."""
        traces = [self.runs[t, algorithm].trace for t in self.topologies if (t, algorithm) in self.runs]
        if not traces:
            return []
        rows = []
        for gen in range(min(len(tr.rows) for tr in traces)):
            at = [tr.rows[gen] for tr in traces]
            lams = [r.lam for r in at if r.lam is not None]
            rows.append(
                (
                    at[0].generation,
                    float(np.mean([r.best_fitness for r in at])),
                    float(np.mean([r.mean_fitness for r in at])),
                    float(np.mean(lams)) if lams else None,
                    at[0].evals,
                )
            )
        return rows

    def summary(self) -> dict:
        stats = {}
        for alg in self.spec.algorithms:
            values = self.finals(alg)
            stats[alg] = {
                "median_mbps": float(np.median(values)) if len(values) else None,
                "mean_mbps": float(np.mean(values)) if len(values) else None,
                "runs": int(len(values)),
            }
        improvement = {}
        ide = stats.get("ide", {}).get("median_mbps")
        for alg in self.spec.algorithms:
            base = stats[alg]["median_mbps"]
            if alg != "ide" and ide is not None and base:
                improvement[alg] = improvement_pct(ide, base)
        return {"algorithms": stats, "ide_median_improvement_pct": improvement}


def improvement_pct(value: float, baseline: float) -> float:
    return 100.0 * (value - baseline) / baseline


def _run_job(spec_dict: dict, t: int, algorithm: str) -> RunResult:
    spec = spec_from_dict(spec_dict)
    net = generate_topology(spec.system, topology_seed(spec.master_seed, t))
    model = RateModel(net, spec.system)
    cfg = dataclasses.replace(spec.optimizer, algorithm=algorithm, seed=optimizer_seed(spec.master_seed, t))
    start = time.perf_counter()
    trace = run_algorithm(algorithm, model, cfg)
    return RunResult(t, algorithm, trace.best_fitness, trace, time.perf_counter() - start)


def run_experiment(spec: ExperimentSpec, workers: int = 1, progress: Callable[[RunResult], None] | None = None) -> ExperimentResult:
    """Optimize every topology with every algorithm.

    Jobs fan out over ``workers`` processes; results are keyed by
    ``(topology, algorithm)`` so the outcome does not depend on ``workers``.
    """
    spec_dict = spec_to_dict(spec)
    jobs = [(t, alg) for t in range(spec.num_topologies) for alg in spec.algorithms]
    result = ExperimentResult(spec)
    if workers <= 1:
        done = (_run_job(spec_dict, t, alg) for t, alg in jobs)
        for run in done:
            result.runs[run.topology, run.algorithm] = run
            if progress:
                progress(run)
        return result
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_job, spec_dict, t, alg) for t, alg in jobs]
        for fut in futures:
            run = fut.result()
            result.runs[run.topology, run.algorithm] = run
            if progress:
                progress(run)
    return result


# --- outputs -----------------------------------------------------------------


def recorded_config(spec: ExperimentSpec) -> dict:
    """Config written into outputs; the output location is left out so it cannot break byte-identity."""
    data = spec_to_dict(spec)
    del data["experiment"]["output_dir"]
    return data


def provenance_header(spec: ExperimentSpec, kind: str) -> str:
    seeds = {
        "topology_seeds": [topology_seed(spec.master_seed, t) for t in range(spec.num_topologies)],
        "optimizer_seeds": [optimizer_seed(spec.master_seed, t) for t in range(spec.num_topologies)],
    }
    return "\n".join(
        [
            f"ris-cellfree {kind}",
            "config: " + json.dumps(recorded_config(spec), sort_keys=True),
            "seeds: " + json.dumps(seeds),
        ]
    )


def _csv_text(header: str, columns, rows) -> str:
    buf = io.StringIO()
    for line in header.splitlines():
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _prepare_dir(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def emit_outputs(result: ExperimentResult, out_dir) -> list[Path]:
    """Write convergence and CDF CSVs per algorithm, final objectives and a summary."""
    out = _prepare_dir(out_dir)
    spec = result.spec
    written = []
    for alg in spec.algorithms:
        path = out / f"convergence_{alg}.csv"
        _write(path, _csv_text(provenance_header(spec, f"convergence {alg}"), TRACE_COLUMNS, result.mean_curve(alg)))
        written.append(path)
        values, cdf = result.cdf(alg)
        path = out / f"cdf_{alg}.csv"
        _write(path, _csv_text(provenance_header(spec, f"cdf {alg}"), ("objective_mbps", "empirical_cdf"), zip(values, cdf)))
        written.append(path)

    rows = [
        (t, topology_seed(spec.master_seed, t), alg, result.runs[t, alg].objective)
        for t in result.topologies
        for alg in spec.algorithms
        if (t, alg) in result.runs
    ]
    path = out / "final_objectives.csv"
    _write(path, _csv_text(provenance_header(spec, "final objectives"), ("topology", "topology_seed", "algorithm", "objective_mbps"), rows))
    written.append(path)

    summary = {"config": recorded_config(spec), **result.summary()}
    path = out / "summary.yaml"
    _write(path, yaml.safe_dump(summary, sort_keys=False))
    written.append(path)

    timing = {}
    for alg in spec.algorithms:
        runs = [r for (t, a), r in result.runs.items() if a == alg]
        gens = sum(max(len(r.trace.rows) - 1, 1) for r in runs)
        timing[alg] = {
            "total_seconds": float(sum(r.seconds for r in runs)),
            "seconds_per_generation": float(sum(r.seconds for r in runs) / gens) if gens else None,
        }
    path = out / "timing.yaml"
    _write(path, yaml.safe_dump(timing, sort_keys=False))
    written.append(path)
    return written


def load_spec_from_output(path) -> ExperimentSpec:
    """Recover the experiment spec recorded in an emitted CSV or summary file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        data = yaml.safe_load(text)
        if "config" not in data:
            raise ConfigError(f"{path} carries no config")
        return spec_from_dict(data["config"])
    for line in text.splitlines():
        if line.startswith("# config: "):
            return spec_from_dict(json.loads(line[len("# config: ") :]))
    raise ConfigError(f"{path} carries no config header")


# --- sweeps ------------------------------------------------------------------


def _label(value) -> str:
    return str(value).replace("/", "_").replace(" ", "")


def run_sweep(spec: ExperimentSpec, out_dir, workers: int = 1) -> dict:
    """Run ``spec`` once per value of ``spec.sweep`` and write one directory per value."""
    if spec.sweep is None:
        raise ConfigError("spec has no sweep section")
    param, values = spec.sweep
    out = _prepare_dir(out_dir)
    rows = []
    results = {}
    for value in values:
        system = dataclasses.replace(spec.system, **{param: value})
        sub = spec.replace(system=system, sweep=None)
        res = run_experiment(sub, workers=workers)
        emit_outputs(res, out / f"{param}={_label(value)}")
        results[value] = res
        for alg in sub.algorithms:
            finals = res.finals(alg)
            rows.append((value, alg, float(np.median(finals)), float(np.mean(finals))))
    _write(
        out / "sweep_summary.csv",
        _csv_text(provenance_header(spec, f"sweep {param}"), (param, "algorithm", "median_mbps", "mean_mbps"), rows),
    )
    return results


# --- closed-form validation ----------------------------------------------------


@dataclass(frozen=True)
class ValidationRow:
    user: int
    closed_form: float
    empirical: float
    rel_error: float
    draws: int
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    rows: list[ValidationRow]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self, header: str = "") -> str:
        return _csv_text(
            header,
            ("user", "sinr_closed_form", "sinr_empirical", "rel_error", "draws", "passed"),
            [(r.user, r.closed_form, r.empirical, r.rel_error, r.draws, int(r.passed)) for r in self.rows],
        )


def closed_form_sinr(theta, net, cfg) -> np.ndarray:
    return evaluate_objective(theta, net, cfg).sinr


def relative_error(closed: float, empirical: float) -> float:
    if closed == 0.0 and empirical == 0.0:
        return 0.0
    if closed == 0.0 or not np.isfinite(empirical):
        return float("inf")
    return abs(closed - empirical) / abs(closed)


def validate_instance(theta, net, cfg, num_draws: int, seed: int, closed_form=closed_form_sinr, tol: float = VALIDATION_TOL) -> ValidationReport:
    closed = np.asarray(closed_form(theta, net, cfg), dtype=float)
    empirical = uatf_statistics(theta, net, cfg, num_draws, seed).sinr
    rows = []
    for k in range(net.num_users):
        err = relative_error(float(closed[k]), float(empirical[k]))
        rows.append(ValidationRow(k, float(closed[k]), float(empirical[k]), err, num_draws, bool(err < tol)))
    return ValidationReport(rows, tol)


def validate_closed_form(spec: ExperimentSpec, closed_form=closed_form_sinr, num_draws: int | None = None) -> ValidationReport:
    """Compare the closed-form SINR with a Monte Carlo UatF estimate on one topology.

    The topology and the random phase vector are derived from
    ``spec.master_seed``; the threshold is 3% relative error per user.
    """
    seed = derived_seed(spec.master_seed, _VALIDATION_KEY)
    net = generate_topology(spec.system, topology_seed(spec.master_seed, 0))
    theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, net.num_elements)
    return validate_instance(theta, net, spec.system, num_draws or spec.mc_draws, seed, closed_form)
