"""Population-based phase-shift optimizers.

``problem`` is any object with a ``dim`` attribute that maps a phase vector
to a fitness when called (``RateModel`` in practice); larger is better.

Randomness is drawn from substreams keyed by ``(seed, generation,
individual)`` before any fitness evaluation, so results do not depend on how
many worker threads evaluate the trials.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from ..config import OptimizerConfig
from ..rates import wrap_phase
from .operators import (
    PBEST,
    CURRENT_TO_PBEST,
    ShadeMemory,
    StrategyStats,
    crossover,
    current_to_pbest_mutant,
    pbest_mutant,
    pbest_pool_size,
    pick_donors,
    random_phases,
    shade_sample,
    shade_update,
    update_lambda,
)
from .trace import OptimizationTrace, TraceRow

log = logging.getLogger(__name__)

_INIT_KEY = 0
_GEN_KEY = 1
_RANDOM_KEY = 2

GA_TOURNAMENT = 2
GA_BLEND_ALPHA = 0.5
GA_MUTATION_STD = 0.1 * np.pi


def substream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


@contextmanager
def _evaluator(problem, workers: int):
    if workers <= 1:
        yield lambda thetas: np.array([problem(t) for t in thetas], dtype=float)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield lambda thetas: np.fromiter(pool.map(problem, thetas), dtype=float, count=len(thetas))


def init_population(cfg: OptimizerConfig, dim: int, seed: int, evaluate) -> tuple[np.ndarray, np.ndarray]:
    """Uniform random phases for ``cfg.pop_size`` individuals and their fitness."""
    thetas = random_phases(substream(seed, _INIT_KEY), (cfg.pop_size, dim))
    return thetas, evaluate(thetas)


def _row(gen: int, fitness: np.ndarray, lam, evals: int) -> TraceRow:
    return TraceRow(gen, float(fitness.max()), float(fitness.mean()), lam, evals)


def _finish(name: str, thetas, fitness, rows, windows=()) -> OptimizationTrace:
    best = int(np.argmax(fitness))
    return OptimizationTrace(
        algorithm=name,
        best_theta=thetas[best].copy(),
        best_fitness=float(fitness[best]),
        rows=rows,
        windows=list(windows),
        population=thetas,
        fitness=fitness,
    )


def run_ide(problem, cfg: OptimizerConfig, workers: int = 1) -> OptimizationTrace:
    """Improved DE: two pbest mutations mixed by an adaptive probability, SHADE (F, CR)."""
    size, dim = cfg.pop_size, problem.dim
    pool_size = pbest_pool_size(size, cfg.pbest_fraction)
    memory = ShadeMemory.fresh(cfg.shade_memory_size)
    stats = StrategyStats(lam=cfg.lambda_init)
    windows = []
    with _evaluator(problem, workers) as evaluate:
        thetas, fitness = init_population(cfg, dim, cfg.seed, evaluate)
        evals = size
        rows = [_row(0, fitness, stats.lam, evals)]
        for gen in range(cfg.max_generations):
            order = np.argsort(-fitness, kind="stable")
            trials = np.empty_like(thetas)
            params = []
            for p in range(size):
                rng = substream(cfg.seed, _GEN_KEY, gen, p)
                strategy = PBEST if rng.random() <= stats.lam else CURRENT_TO_PBEST
                F, CR = shade_sample(memory, strategy, rng)
                pbest, r1, r2 = pick_donors(p, order, pool_size, rng)
                if strategy == PBEST:
                    mutant = pbest_mutant(thetas[pbest], thetas[r1], thetas[r2], F)
                else:
                    mutant = current_to_pbest_mutant(thetas[p], thetas[pbest], thetas[r1], thetas[r2], F)
                trials[p] = crossover(thetas[p], mutant, CR, rng)
                params.append((strategy, F, CR))

            trial_fit = evaluate(trials)
            evals += size
            successes = ([], [])
            for p, (strategy, F, CR) in enumerate(params):
                gain = trial_fit[p] - fitness[p]
                stats = stats.charge(strategy, gain)
                if gain > 0:
                    successes[strategy].append((F, CR, gain))
                if trial_fit[p] >= fitness[p]:
                    thetas[p] = trials[p]
                    fitness[p] = trial_fit[p]
            for strategy in (PBEST, CURRENT_TO_PBEST):
                memory = shade_update(memory, strategy, successes[strategy])
            if (gen + 1) % cfg.lambda_window == 0:
                closed = (stats.delta_improve, stats.cfes)
                stats = update_lambda(stats)
                windows.append((*closed, stats.lam))
            rows.append(_row(gen + 1, fitness, stats.lam, evals))
    log.debug("ide finished: best %.6g after %d evaluations", fitness.max(), evals)
    return _finish("ide", thetas, fitness, rows, windows)


def run_de(problem, cfg: OptimizerConfig, workers: int = 1) -> OptimizationTrace:
    """Canonical DE/rand/1/bin with fixed F and CR."""
    size, dim = cfg.pop_size, problem.dim
    with _evaluator(problem, workers) as evaluate:
        thetas, fitness = init_population(cfg, dim, cfg.seed, evaluate)
        evals = size
        rows = [_row(0, fitness, None, evals)]
        for gen in range(cfg.max_generations):
            trials = np.empty_like(thetas)
            for p in range(size):
                rng = substream(cfg.seed, _GEN_KEY, gen, p)
                others = np.delete(np.arange(size), p)
                r1, r2, r3 = rng.choice(others, size=3, replace=False)
                mutant = wrap_phase(thetas[r1] + cfg.de_fixed_F * wrap_phase(thetas[r2] - thetas[r3]))
                trials[p] = crossover(thetas[p], mutant, cfg.de_fixed_CR, rng)
            trial_fit = evaluate(trials)
            evals += size
            keep = trial_fit >= fitness
            thetas[keep] = trials[keep]
            fitness[keep] = trial_fit[keep]
            rows.append(_row(gen + 1, fitness, None, evals))
    return _finish("de", thetas, fitness, rows)


def _tournament(fitness, rng) -> int:
    contenders = rng.integers(len(fitness), size=GA_TOURNAMENT)
    return int(contenders[np.argmax(fitness[contenders])])


def run_ga(problem, cfg: OptimizerConfig, workers: int = 1) -> OptimizationTrace:
    """Real-coded generational GA with one elite.

    Binary tournaments pick two parents, blend (BLX-0.5) crossover mixes them
    and each gene gets Gaussian noise with probability ``1/N``. The previous
    best replaces the worst child, so the elite never degrades.
    """
    size, dim = cfg.pop_size, problem.dim
    with _evaluator(problem, workers) as evaluate:
        thetas, fitness = init_population(cfg, dim, cfg.seed, evaluate)
        evals = size
        rows = [_row(0, fitness, None, evals)]
        for gen in range(cfg.max_generations):
            children = np.empty_like(thetas)
            for j in range(size):
                rng = substream(cfg.seed, _GEN_KEY, gen, j)
                a = thetas[_tournament(fitness, rng)]
                b = thetas[_tournament(fitness, rng)]
                lo, hi = np.minimum(a, b), np.maximum(a, b)
                span = hi - lo
                child = rng.uniform(lo - GA_BLEND_ALPHA * span, hi + GA_BLEND_ALPHA * span)
                flip = rng.random(dim) < 1.0 / dim
                child = child + flip * rng.normal(0.0, GA_MUTATION_STD, dim)
                children[j] = wrap_phase(child)
            child_fit = evaluate(children)
            evals += size
            elite = int(np.argmax(fitness))
            worst = int(np.argmin(child_fit))
            if fitness[elite] > child_fit[worst]:
                children[worst] = thetas[elite]
                child_fit[worst] = fitness[elite]
            thetas, fitness = children, child_fit
            rows.append(_row(gen + 1, fitness, None, evals))
    return _finish("ga", thetas, fitness, rows)


def run_random(problem, cfg: OptimizerConfig, workers: int = 1) -> OptimizationTrace:
    """One uniformly drawn phase vector, no search."""
    theta = random_phases(substream(cfg.seed, _RANDOM_KEY), (1, problem.dim))
    fitness = np.array([problem(theta[0])], dtype=float)
    return _finish("random", theta, fitness, [_row(0, fitness, None, 1)])


RUNNERS = {"ide": run_ide, "de": run_de, "ga": run_ga, "random": run_random}


def run_algorithm(name: str, problem, cfg: OptimizerConfig, workers: int = 1) -> OptimizationTrace:
    try:
        runner = RUNNERS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {sorted(RUNNERS)}") from None
    return runner(problem, cfg, workers)
