from .engines import RUNNERS, init_population, run_algorithm, run_de, run_ga, run_ide, run_random
from .operators import (
    Individual,
    ShadeMemory,
    StrategyStats,
    crossover,
    crossover_mask,
    mutate_current_to_pbest,
    mutate_pbest,
    select,
    shade_sample,
    shade_update,
    update_lambda,
)
from .trace import TRACE_COLUMNS, OptimizationTrace, TraceRow, read_trace_csv

__all__ = [
    "RUNNERS",
    "TRACE_COLUMNS",
    "Individual",
    "OptimizationTrace",
    "ShadeMemory",
    "StrategyStats",
    "TraceRow",
    "crossover",
    "crossover_mask",
    "init_population",
    "mutate_current_to_pbest",
    "mutate_pbest",
    "read_trace_csv",
    "run_algorithm",
    "run_de",
    "run_ga",
    "run_ide",
    "run_random",
    "select",
    "shade_sample",
    "shade_update",
    "update_lambda",
]
