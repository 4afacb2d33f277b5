import numpy as np
import pytest

from albo.auglag import ALState, Variant
from albo.gp import lhs_sample
from albo.problems import BoxDomain, ConstrainedProblem, Evaluation, make_toy_original, make_version
from albo.strategies import (
    StrategyConfig,
    Trajectory,
    best_feasible_value,
    bo_auglag,
    current_best_al,
    random_search,
    run_strategy,
)

# small settings keep BO runs to a fraction of a second
FAST = dict(n_init=4, n_iter=4, candidate_count=60, mc_draws=100)


def _traj(fs, feas):
    t = Trajectory()
    for f, ok in zip(fs, feas):
        t.record(Evaluation(x=np.zeros(1), f=f, c=np.array([-1.0 if ok else 1.0]), feasible=ok), None)
    return t


def infeasible_problem():
    return ConstrainedProblem(
        objective=lambda x: x[..., 0],
        constraints=(lambda x: 1.0 + x[..., 0] ** 2,),
        domain=BoxDomain([0.0, 0.0], [1.0, 1.0]),
    )


class TestBestFeasible:
    def test_single(self):
        assert best_feasible_value(_traj([0.3], [True]), 1) == 0.3

    def test_prefix_minima(self):
        t = _traj([0.5, 0.2, 0.4], [True] * 3)
        assert [best_feasible_value(t, k) for k in (1, 2, 3)] == [0.5, 0.2, 0.2]

    def test_all_infeasible(self):
        assert best_feasible_value(_traj([0.1, 0.0], [False, False]), 2) is None

    def test_skips_infeasible(self):
        t = _traj([0.9, -5.0, 0.7], [True, False, True])
        assert t.best_feasible == [0.9, 0.9, 0.7]

    @pytest.mark.parametrize("k", [0, 4])
    def test_out_of_range(self, k):
        with pytest.raises(IndexError):
            best_feasible_value(_traj([1.0, 2.0, 3.0], [True] * 3), k)


class TestRandomSearch:
    def test_budget_and_domain(self):
        p = make_version(3)
        t = random_search(p, 50, seed=0)
        assert len(t) == 50
        assert all(p.domain.contains(ev.x) for ev in t.evaluations)

    def test_no_feasible_sentinel(self):
        t = random_search(infeasible_problem(), 1, seed=0)
        assert t.final_best is None

    def test_invalid_budget(self):
        with pytest.raises(ValueError):
            random_search(make_version(1), 0)

    def test_version1_mean(self):
        finals = [random_search(make_version(1), 100, seed=s).final_best for s in range(100)]
        assert np.mean(finals) == pytest.approx(-0.874, abs=0.02)


class TestBO:
    def test_zero_iterations_is_initial_design(self):
        p = make_toy_original()
        cfg = StrategyConfig(n_init=6, n_iter=0, seed=3)
        t = bo_auglag(p, cfg)
        X0 = lhs_sample(6, 2, seed=np.random.default_rng([3, 0]))
        np.testing.assert_array_equal(np.array([ev.x for ev in t.evaluations]), X0)
        assert t.diagnostics == []

    @pytest.mark.parametrize("surrogate", ["indep", "lmc"])
    def test_budget_respected(self, surrogate):
        p = make_version(2)
        cfg = StrategyConfig(**FAST, surrogate=surrogate, seed=1)
        t = bo_auglag(p, cfg)
        assert len(t) == cfg.budget == len(t.best_feasible) == len(t.al_states)
        assert all(p.domain.contains(ev.x) for ev in t.evaluations)

    def test_reproducible(self):
        p = make_toy_original()
        cfg = StrategyConfig(**FAST, surrogate="lmc", seed=9)
        a, b = bo_auglag(p, cfg), bo_auglag(p, cfg)
        np.testing.assert_array_equal([ev.x for ev in a.evaluations], [ev.x for ev in b.evaluations])
        assert a.best_feasible == b.best_feasible

    def test_needs_enough_initial_points(self):
        with pytest.raises(ValueError):
            bo_auglag(make_version(3), StrategyConfig(n_init=3, n_iter=1))

    def test_multipliers_stay_non_negative(self):
        t = bo_auglag(make_toy_original(), StrategyConfig(**FAST, seed=2))
        assert all(np.all(s.lam >= 0) and s.rho > 0 for s in t.al_states)

    def test_withmax_best_al_when_all_feasible(self):
        p = make_version(1)
        t = Trajectory()
        for x in ([0.1, 0.9], [0.0, 1.0], [0.2, 0.95]):
            from albo.problems import evaluate

            t.record(evaluate(p, x), None)
        assert all(ev.feasible for ev in t.evaluations)
        assert current_best_al(t, ALState([0.0, 0.0], 0.5, Variant.WITHMAX)) == t.final_best

    def test_infeasible_problem_completes(self):
        t = bo_auglag(infeasible_problem(), StrategyConfig(**FAST, seed=0))
        assert t.final_best is None
        assert len(t) == 8


@pytest.mark.parametrize("strategy", ["random", "nomax", "withmax"])
def test_best_feasible_monotone_across_seeds(strategy):
    p = make_toy_original()
    for seed in range(50):
        cfg = StrategyConfig(n_init=3, n_iter=3, candidate_count=40, mc_draws=50, seed=seed)
        t = run_strategy(p, strategy, cfg)
        vals = [v for v in t.best_feasible if v is not None]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        # once defined, never becomes absent again
        first = next((i for i, v in enumerate(t.best_feasible) if v is not None), len(t))
        assert all(v is not None for v in t.best_feasible[first:])


def test_unknown_strategy():
    with pytest.raises(ValueError):
        run_strategy(make_version(1), "gradient", StrategyConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig(surrogate="deep")
    with pytest.raises(ValueError):
        StrategyConfig(n_iter=-1)
    assert StrategyConfig(n_init=10, n_iter=100).budget == 110
