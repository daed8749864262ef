import threading

import numpy as np
import pytest

from ris_cellfree.config import OptimizerConfig, SystemConfig
from ris_cellfree.evolution import (
    TRACE_COLUMNS,
    read_trace_csv,
    run_algorithm,
    run_de,
    run_ga,
    run_ide,
    run_random,
)
from ris_cellfree.rates import RateModel
from ris_cellfree.system import generate_topology

CFG = SystemConfig(num_aps=5, num_users=3, num_ris_elements=8, pilot_len=2, blockage_prob=1.0)
NET = generate_topology(CFG, 4)
SEARCH = ("ide", "de", "ga")


class Recorder:
    """Objective wrapper that logs every evaluated phase vector."""

    def __init__(self, model):
        self.model = model
        self.dim = model.dim
        self.seen = []
        self._lock = threading.Lock()

    def __call__(self, theta):
        with self._lock:
            self.seen.append(np.array(theta, copy=True))
        return self.model(theta)


@pytest.fixture
def problem():
    return Recorder(RateModel(NET, CFG))


def opt(**over):
    base = dict(pop_size=8, max_generations=30, lambda_window=5, seed=3)
    return OptimizerConfig(**{**base, **over})


class TestZeroBudget:
    @pytest.mark.parametrize("name", SEARCH)
    def test_best_initial(self, name, problem):
        trace = run_algorithm(name, problem, opt(max_generations=0))
        initial = [problem.model(t) for t in problem.seen]
        assert len(problem.seen) == 8
        assert trace.best_fitness == max(initial)
        assert len(trace.rows) == 1 and trace.evaluations == 8


class TestRuns:
    @pytest.mark.parametrize("name", SEARCH)
    def test_monotone_and_feasible(self, name, problem):
        trace = run_algorithm(name, problem, opt())
        assert np.all(np.diff(trace.best_curve()) >= 0)
        seen = np.array(problem.seen)
        assert np.all(seen >= -np.pi) and np.all(seen <= np.pi)

    @pytest.mark.parametrize("name", SEARCH)
    def test_budget(self, name, problem):
        trace = run_algorithm(name, problem, opt())
        assert trace.evaluations == len(problem.seen) == 8 * 31
        assert [r.evals for r in trace.rows] == [8 * (g + 1) for g in range(31)]

    @pytest.mark.parametrize("name", SEARCH)
    def test_reported_fitness_is_objective(self, name, problem):
        trace = run_algorithm(name, problem, opt(max_generations=5))
        assert trace.best_fitness == problem.model(trace.best_theta)
        for theta, f in zip(trace.population, trace.fitness):
            assert f == problem.model(theta)

    @pytest.mark.parametrize("name", SEARCH + ("random",))
    def test_deterministic(self, name):
        model = RateModel(NET, CFG)
        a, b = run_algorithm(name, model, opt()), run_algorithm(name, model, opt())
        assert a.rows == b.rows
        np.testing.assert_array_equal(a.best_theta, b.best_theta)

    @pytest.mark.parametrize("name", SEARCH)
    def test_worker_count_irrelevant(self, name):
        model = RateModel(NET, CFG)
        a, b = run_algorithm(name, model, opt(), workers=1), run_algorithm(name, model, opt(), workers=3)
        assert a.rows == b.rows
        np.testing.assert_array_equal(a.population, b.population)

    def test_seed_matters(self):
        model = RateModel(NET, CFG)
        assert run_ide(model, opt(seed=1)).rows != run_ide(model, opt(seed=2)).rows

    def test_search_beats_start(self):
        model = RateModel(NET, CFG)
        trace = run_ide(model, opt(max_generations=60))
        assert trace.best_fitness > trace.rows[0].best_fitness


class TestIdeAdaptation:
    def test_lambda_values(self):
        trace = run_ide(RateModel(NET, CFG), opt(lambda_init=0.37))
        lams = [r.lam for r in trace.rows]
        assert lams[:5] == [0.37] * 5
        assert set(lams[5:]) <= {0.2, 0.8}
        assert len(trace.windows) == 30 // 5
        for _, _, lam in trace.windows:
            assert lam in (0.2, 0.8)

    def test_window_accounting(self):
        trace = run_ide(RateModel(NET, CFG), opt())
        for delta, cfes, _ in trace.windows:
            assert sum(cfes) == 8 * 5
            assert min(delta) >= 0

    def test_lambda_follows_rates(self):
        trace = run_ide(RateModel(NET, CFG), opt(max_generations=40))
        for delta, cfes, lam in trace.windows:
            rates = [d / c if c else 0.0 for d, c in zip(delta, cfes)]
            assert lam == (0.2 if rates[0] < rates[1] else 0.8)


class TestRandom:
    def test_single_point(self, problem):
        trace = run_random(problem, opt())
        assert len(problem.seen) == 1 and trace.evaluations == 1
        assert len(trace.rows) == 1
        assert trace.best_fitness >= 0

    def test_reproducible(self):
        model = RateModel(NET, CFG)
        assert run_random(model, opt()).best_fitness == run_random(model, opt()).best_fitness


class TestTraceCsv:
    def test_columns_and_roundtrip(self):
        trace = run_ide(RateModel(NET, CFG), opt(max_generations=4))
        text = trace.to_csv("hello\nworld")
        assert text.startswith("# hello\n# world\n")
        assert text.splitlines()[2] == ",".join(TRACE_COLUMNS)
        rows = read_trace_csv(text)
        assert [r["best_fitness_mbps"] for r in rows] == [r.best_fitness for r in trace.rows]
        assert [r["evals_so_far"] for r in rows] == [r.evals for r in trace.rows]

    def test_lambda_blank_for_baselines(self):
        rows = read_trace_csv(run_de(RateModel(NET, CFG), opt(max_generations=2)).to_csv())
        assert all(np.isnan(r["lambda"]) for r in rows)


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        run_algorithm("pso", RateModel(NET, CFG), opt())


def test_ga_elite_survives():
    trace = run_ga(RateModel(NET, CFG), opt())
    curve = trace.best_curve()
    assert np.all(np.diff(curve) >= 0)
    assert trace.best_fitness == curve[-1]
