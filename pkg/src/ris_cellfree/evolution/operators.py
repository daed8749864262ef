"""Variation, selection and parameter-adaptation operators.

Phase vectors live on the circle: difference vectors are taken as the
shortest signed arc and every mutant is wrapped back into ``[-pi, pi)``
instead of being clipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..rates import wrap_phase

PBEST, CURRENT_TO_PBEST = 0, 1
LAMBDA_LOW, LAMBDA_HIGH = 0.2, 0.8
SHADE_CR_STD = 0.1
SHADE_F_SCALE = 0.1


@dataclass(frozen=True)
class Individual:
    theta: np.ndarray
    fitness: float


def initial_phases(alpha) -> np.ndarray:
    """Map uniform draws on ``[0, 1]`` to phases on ``[-pi, pi]``."""
    return -np.pi + 2.0 * np.pi * np.asarray(alpha, dtype=float)


def random_phases(rng: np.random.Generator, shape) -> np.ndarray:
    return initial_phases(rng.random(shape))


def pbest_pool_size(pop_size: int, fraction: float) -> int:
    return min(pop_size, max(2, math.ceil(fraction * pop_size)))


def pick_donors(p: int, order, pool_size: int, rng: np.random.Generator) -> tuple[int, int, int]:
    """Pick ``pbest`` among the first ``pool_size`` of ``order`` and two random donors.

    All three indices differ from each other and from ``p``.
    """
    size = len(order)
    if size < 4:
        raise ValueError("population must hold at least 4 individuals")
    pool = [i for i in order[:pool_size] if i != p]
    pbest = int(pool[rng.integers(len(pool))])
    others = np.array([i for i in range(size) if i != p and i != pbest])
    r1, r2 = rng.choice(others, size=2, replace=False)
    return pbest, int(r1), int(r2)


def _pick_indices(p: int, fitness, pbest_fraction: float, rng):
    fitness = np.asarray(fitness)
    order = np.argsort(-fitness, kind="stable")
    return pick_donors(p, order, pbest_pool_size(len(fitness), pbest_fraction), rng)


def pbest_mutant(theta_pbest, theta_r1, theta_r2, F: float) -> np.ndarray:
    return wrap_phase(np.asarray(theta_pbest) + F * wrap_phase(np.asarray(theta_r1) - np.asarray(theta_r2)))


def current_to_pbest_mutant(theta_p, theta_pbest, theta_r1, theta_r2, F: float) -> np.ndarray:
    theta_p = np.asarray(theta_p)
    step = F * wrap_phase(np.asarray(theta_pbest) - theta_p) + F * wrap_phase(np.asarray(theta_r1) - np.asarray(theta_r2))
    return wrap_phase(theta_p + step)


def mutate_pbest(p: int, population, fitness, F: float, pbest_fraction: float, rng) -> np.ndarray:
    """DE/pbest/1 mutant for individual ``p`` of ``population`` (shape ``(I, N)``)."""
    pbest, r1, r2 = _pick_indices(p, fitness, pbest_fraction, rng)
    return pbest_mutant(population[pbest], population[r1], population[r2], F)


def mutate_current_to_pbest(p: int, population, fitness, F: float, pbest_fraction: float, rng) -> np.ndarray:
    """DE/current-to-pbest/1 mutant for individual ``p``."""
    pbest, r1, r2 = _pick_indices(p, fitness, pbest_fraction, rng)
    return current_to_pbest_mutant(population[p], population[pbest], population[r1], population[r2], F)


def crossover_mask(alpha, cr: float, n_rand: int) -> np.ndarray:
    """True where the trial takes the mutant component (``n_rand`` is 0-based)."""
    mask = np.asarray(alpha) <= cr
    mask[n_rand] = True
    return mask


def crossover(parent, mutant, cr: float, rng: np.random.Generator) -> np.ndarray:
    """Binomial crossover; at least one component always comes from the mutant."""
    parent = np.asarray(parent)
    n = parent.shape[0]
    mask = crossover_mask(rng.random(n), cr, int(rng.integers(n)))
    return np.where(mask, mutant, parent)


def select(parent: Individual, trial: Individual) -> Individual:
    """Greedy one-to-one survival; ties go to the trial."""
    return trial if trial.fitness >= parent.fitness else parent


# --- mutation-strategy probability ---------------------------------------------


@dataclass(frozen=True)
class StrategyStats:
    """Improvement and evaluation counters of the two mutation strategies."""

    delta_improve: tuple[float, float] = (0.0, 0.0)
    cfes: tuple[int, int] = (0, 0)
    lam: float = 0.5

    def charge(self, strategy: int, improvement: float) -> "StrategyStats":
        delta = list(self.delta_improve)
        cfes = list(self.cfes)
        delta[strategy] += max(0.0, improvement)
        cfes[strategy] += 1
        return replace(self, delta_improve=tuple(delta), cfes=tuple(cfes))


def update_lambda(stats: StrategyStats) -> StrategyStats:
    """Favour the strategy with the higher improvement per evaluation.

    A strategy that consumed no evaluations has rate 0; if neither did,
    ``lam`` is kept. Counters are reset either way.
    """
    rates = [d / c if c > 0 else 0.0 for d, c in zip(stats.delta_improve, stats.cfes)]
    lam = stats.lam
    if any(c > 0 for c in stats.cfes):
        lam = LAMBDA_LOW if rates[PBEST] < rates[CURRENT_TO_PBEST] else LAMBDA_HIGH
    return StrategyStats(lam=lam)


# --- SHADE ------------------------------------------------------------------


@dataclass(frozen=True)
class ShadeMemory:
    """Circular success memories, one row per mutation strategy."""

    mf: np.ndarray
    mcr: np.ndarray
    write_index: tuple[int, ...] = field(default=(0, 0))

    @classmethod
    def fresh(cls, size: int, strategies: int = 2, value: float = 0.5) -> "ShadeMemory":
        return cls(
            mf=np.full((strategies, size), value),
            mcr=np.full((strategies, size), value),
            write_index=(0,) * strategies,
        )

    @property
    def size(self) -> int:
        return self.mf.shape[1]


def clip_cr(value: float) -> float:
    return float(min(1.0, max(0.0, value)))


def clip_f(value: float) -> float:
    return float(min(1.0, value))


def shade_sample(memory: ShadeMemory, strategy: int, rng: np.random.Generator) -> tuple[float, float]:
    """Draw ``(F, CR)`` around a random slot of the strategy's memory."""
    slot = int(rng.integers(memory.size))
    cr = clip_cr(rng.normal(memory.mcr[strategy, slot], SHADE_CR_STD))
    f = 0.0
    while f <= 0.0:
        f = memory.mf[strategy, slot] + SHADE_F_SCALE * rng.standard_cauchy()
    return clip_f(f), cr


def shade_update(memory: ShadeMemory, strategy: int, successes) -> ShadeMemory:
    """Write the improvement-weighted means of successful ``(F, CR)`` pairs.

    ``successes`` holds ``(F, CR, improvement)`` triples with positive
    improvement. CR uses the weighted arithmetic mean and F the weighted
    Lehmer mean. An empty list returns ``memory`` unchanged.
    """
    if len(successes) == 0:
        return memory
    f, cr, gain = (np.asarray(col, dtype=float) for col in zip(*successes))
    w = gain / gain.sum()
    slot = memory.write_index[strategy]
    mf = memory.mf.copy()
    mcr = memory.mcr.copy()
    mcr[strategy, slot] = np.dot(w, cr)
    mf[strategy, slot] = np.dot(w, f**2) / np.dot(w, f)
    index = list(memory.write_index)
    index[strategy] = (slot + 1) % memory.size
    return ShadeMemory(mf=mf, mcr=mcr, write_index=tuple(index))
