from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

TRACE_COLUMNS = ("generation", "best_fitness_mbps", "mean_fitness_mbps", "lambda", "evals_so_far")


def fmt(value) -> str:
    """Shortest round-tripping text for a float; empty for missing values."""
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class TraceRow:
    generation: int
    best_fitness: float
    mean_fitness: float
    lam: float | None
    evals: int


@dataclass
class OptimizationTrace:
    """Result of one optimizer run: best solution plus per-generation history."""

    algorithm: str
    best_theta: np.ndarray
    best_fitness: float
    rows: list[TraceRow] = field(default_factory=list)
    # IDE only: (delta_improve, cfes, lambda after update) per closed window
    windows: list[tuple[tuple[float, float], tuple[int, int], float]] = field(default_factory=list)
    population: np.ndarray | None = None
    fitness: np.ndarray | None = None

    @property
    def evaluations(self) -> int:
        return self.rows[-1].evals if self.rows else 0

    def best_curve(self) -> np.ndarray:
        return np.array([r.best_fitness for r in self.rows])

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.rows:
            writer.writerow([r.generation, fmt(r.best_fitness), fmt(r.mean_fitness), fmt(r.lam), r.evals])
        return buf.getvalue()


def read_trace_csv(text: str) -> list[dict[str, float]]:
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        rows.append({k: float(v) if v != "" else float("nan") for k, v in rec.items()})
    return rows
