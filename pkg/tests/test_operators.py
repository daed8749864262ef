import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ris_cellfree.evolution.operators import (
    CURRENT_TO_PBEST,
    LAMBDA_HIGH,
    LAMBDA_LOW,
    PBEST,
    Individual,
    ShadeMemory,
    StrategyStats,
    clip_cr,
    clip_f,
    crossover,
    crossover_mask,
    current_to_pbest_mutant,
    initial_phases,
    mutate_current_to_pbest,
    mutate_pbest,
    pbest_mutant,
    pbest_pool_size,
    pick_donors,
    select,
    shade_sample,
    shade_update,
    update_lambda,
)

phases = st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=8).map(np.array)


class TestInit:
    def test_endpoints(self):
        assert initial_phases(0.0) == -np.pi
        assert initial_phases(1.0) == np.pi
        assert initial_phases(0.5) == 0.0

    @given(st.floats(0.0, 1.0))
    def test_in_domain(self, a):
        assert -np.pi <= initial_phases(a) <= np.pi


class TestMutation:
    def test_pbest_zero_scale(self):
        pb = np.array([0.3, -1.0])
        np.testing.assert_array_equal(pbest_mutant(pb, [1.0, 2.0], [-2.0, 0.5], 0.0), pb)

    def test_pbest_equal_donors(self):
        pb = np.array([0.3, -1.0])
        np.testing.assert_array_equal(pbest_mutant(pb, [1.0, 2.0], [1.0, 2.0], 0.7), pb)

    def test_pbest_wrap(self):
        out = pbest_mutant([3.0], [0.5], [0.0], 1.0)
        assert out[0] == pytest.approx(3.5 - 2 * np.pi, abs=1e-12)
        assert out[0] == pytest.approx(-2.783, abs=1e-3)

    def test_current_zero_scale(self):
        p = np.array([0.1, 2.0, -3.0])
        np.testing.assert_array_equal(current_to_pbest_mutant(p, [1, 1, 1], [0, 2, 0], [3, -3, 1], 0.0), p)

    @given(phases, st.floats(0.0, 1.0))
    def test_current_fixed_point(self, p, f):
        r = np.zeros_like(p) + 0.4
        np.testing.assert_allclose(current_to_pbest_mutant(p, p, r, r, f), p, atol=1e-12)

    def test_current_unit_scale(self):
        p, pb, r1, r2 = [0.5], [2.0], [1.0], [-0.5]
        out = current_to_pbest_mutant(p, pb, r1, r2, 1.0)
        assert out[0] == pytest.approx(2.0 + 1.5 - 2 * np.pi, abs=1e-12)

    @given(phases, phases, st.floats(0.0, 1.0))
    @settings(max_examples=50)
    def test_mutants_feasible(self, a, b, f):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        for out in (pbest_mutant(a, b, a, f), current_to_pbest_mutant(a, b, b, a, f)):
            assert np.all(out >= -np.pi) and np.all(out < np.pi)

    def test_population_operators(self):
        rng = np.random.default_rng(0)
        pop = rng.uniform(-np.pi, np.pi, (10, 3))
        fit = np.arange(10.0)
        top = {8, 9}
        for p in range(10):
            out = mutate_pbest(p, pop, fit, 0.0, 0.1, rng)
            assert any(np.array_equal(out, pop[i]) for i in top - {p})
            np.testing.assert_array_equal(mutate_current_to_pbest(p, pop, fit, 0.0, 0.1, rng), pop[p])


class TestDonors:
    @pytest.mark.parametrize("size, frac, expected", [(50, 0.1, 5), (4, 0.1, 2), (10, 1.0, 10), (11, 0.1, 2)])
    def test_pool_size(self, size, frac, expected):
        assert pbest_pool_size(size, frac) == expected

    @given(st.integers(4, 30), st.integers(0, 2**32 - 1), st.data())
    @settings(max_examples=60)
    def test_distinct(self, size, seed, data):
        p = data.draw(st.integers(0, size - 1))
        rng = np.random.default_rng(seed)
        order = rng.permutation(size)
        pool = pbest_pool_size(size, 0.1)
        pbest, r1, r2 = pick_donors(p, order, pool, rng)
        assert len({p, pbest, r1, r2}) == 4
        assert pbest in set(order[:pool].tolist())

    def test_rejects_tiny_population(self):
        with pytest.raises(ValueError):
            pick_donors(0, [0, 1, 2], 2, np.random.default_rng(0))


class TestCrossover:
    def test_full_rate(self):
        rng = np.random.default_rng(1)
        parent, mutant = np.zeros(6), np.ones(6)
        np.testing.assert_array_equal(crossover(parent, mutant, 1.0, rng), mutant)

    def test_zero_rate(self):
        rng = np.random.default_rng(2)
        parent, mutant = np.zeros(6), np.ones(6)
        for _ in range(20):
            assert crossover(parent, mutant, 0.0, rng).sum() == 1.0

    def test_mask_example(self):
        # n_rand = 2 in 1-based numbering
        mask = crossover_mask([0.3, 0.9, 0.1, 0.8], 0.5, 1)
        assert mask.tolist() == [True, True, True, False]

    @given(st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
    def test_at_least_one_mutant_gene(self, cr, seed):
        out = crossover(np.zeros(5), np.ones(5), cr, np.random.default_rng(seed))
        assert out.sum() >= 1


class TestSelect:
    def test_better(self):
        p, t = Individual(np.zeros(1), 1.0), Individual(np.ones(1), 2.0)
        assert select(p, t) is t

    def test_tie_admits_trial(self):
        p, t = Individual(np.zeros(1), 1.0), Individual(np.ones(1), 1.0)
        assert select(p, t) is t

    def test_worse(self):
        p, t = Individual(np.zeros(1), 1.0), Individual(np.ones(1), 0.5)
        assert select(p, t) is p


class TestLambda:
    def test_first_better(self):
        out = update_lambda(StrategyStats((10.0, 5.0), (100, 100), 0.5))
        assert out.lam == LAMBDA_HIGH == 0.8

    def test_second_better(self):
        out = update_lambda(StrategyStats((0.0, 1.0), (50, 50), 0.5))
        assert out.lam == LAMBDA_LOW == 0.2

    def test_degenerate_window(self):
        out = update_lambda(StrategyStats((0.0, 0.0), (0, 0), 0.37))
        assert out.lam == 0.37

    def test_unused_strategy_has_zero_rate(self):
        assert update_lambda(StrategyStats((0.0, 3.0), (0, 10), 0.5)).lam == 0.2
        assert update_lambda(StrategyStats((3.0, 0.0), (10, 0), 0.5)).lam == 0.8

    def test_counters_reset(self):
        out = update_lambda(StrategyStats((1.0, 2.0), (3, 4), 0.5))
        assert out.delta_improve == (0.0, 0.0) and out.cfes == (0, 0)

    def test_charge(self):
        s = StrategyStats().charge(PBEST, 2.0).charge(PBEST, -1.0).charge(CURRENT_TO_PBEST, 0.5)
        assert s.delta_improve == (2.0, 0.5)
        assert s.cfes == (2, 1)


class TestShade:
    def test_clip_cr(self):
        assert clip_cr(0.5 - 0.8) == 0.0
        assert clip_cr(1.3) == 1.0
        assert clip_cr(0.4) == 0.4

    def test_clip_f(self):
        assert clip_f(0.9 + 0.8) == 1.0
        assert clip_f(0.3) == 0.3

    def test_mean_cr(self):
        mem, rng = ShadeMemory.fresh(10), np.random.default_rng(3)
        crs = [shade_sample(mem, PBEST, rng)[1] for _ in range(10_000)]
        assert abs(np.mean(crs) - 0.5) <= 0.02

    def test_sample_ranges(self):
        mem, rng = ShadeMemory.fresh(5, value=0.05), np.random.default_rng(4)
        for _ in range(2_000):
            f, cr = shade_sample(mem, CURRENT_TO_PBEST, rng)
            assert 0.0 < f <= 1.0 and 0.0 <= cr <= 1.0

    def test_single_success(self):
        mem = shade_update(ShadeMemory.fresh(3, value=0.9), PBEST, [(0.5, 0.5, 1.0)])
        assert mem.mf[PBEST, 0] == 0.5 and mem.mcr[PBEST, 0] == 0.5
        assert mem.write_index == (1, 0)
        assert mem.mf[CURRENT_TO_PBEST].tolist() == [0.9] * 3

    def test_lehmer_mean(self):
        mem = shade_update(ShadeMemory.fresh(3), CURRENT_TO_PBEST, [(0.2, 0.1, 1.0), (0.8, 0.7, 1.0)])
        assert mem.mf[CURRENT_TO_PBEST, 0] == pytest.approx(0.68, abs=1e-15)
        assert mem.mcr[CURRENT_TO_PBEST, 0] == pytest.approx(0.4, abs=1e-15)

    def test_weighted_cr(self):
        mem = shade_update(ShadeMemory.fresh(2), PBEST, [(0.5, 0.0, 1.0), (0.5, 1.0, 3.0)])
        assert mem.mcr[PBEST, 0] == pytest.approx(0.75)

    def test_empty_is_identity(self):
        mem = ShadeMemory.fresh(4)
        assert shade_update(mem, PBEST, []) is mem

    def test_write_index_wraps(self):
        mem = ShadeMemory.fresh(2)
        for _ in range(3):
            mem = shade_update(mem, PBEST, [(0.3, 0.3, 1.0)])
        assert mem.write_index == (1, 0)

    @given(
        st.lists(
            st.tuples(
                st.sampled_from([PBEST, CURRENT_TO_PBEST]),
                st.lists(st.tuples(st.floats(1e-6, 1.0), st.floats(0.0, 1.0), st.floats(1e-9, 1e3)), max_size=6),
            ),
            max_size=25,
        )
    )
    @settings(max_examples=80)
    def test_memory_stays_in_range(self, updates):
        mem = ShadeMemory.fresh(4)
        for strategy, successes in updates:
            mem = shade_update(mem, strategy, successes)
        assert np.all(mem.mf > 0) and np.all(mem.mf <= 1 + 1e-12)
        assert np.all(mem.mcr >= -1e-12) and np.all(mem.mcr <= 1 + 1e-12)
        assert all(0 <= i < mem.size for i in mem.write_index)
