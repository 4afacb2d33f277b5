"""End-to-end acceptance checks. Each test logs a PASS/FAIL line for its criterion."""

import time

import numpy as np
import pytest

from albo.acquisition import SurrogateBundle, ei_batch, ei_montecarlo
from albo.auglag import ALState, Variant, al_saddle_check, al_value
from albo.gp import gp_fit, lhs_sample
from albo.harness import ExperimentConfig, aggregate, run_experiment
from albo.harness.csvio import read_csv, write_csv
from albo.harness.plotting import emit_plot, render_convergence
from albo.lmc import IndependentModel, correlation_estimate, economy_svd, lmc_fit, lmc_predict, lmc_sample
from albo.problems import (
    counterexample_minimizer,
    counterexample_penalized,
    counterexample_penalized_grad,
    make_counterexample_1d,
    make_toy_original,
)
from albo.strategies import StrategyConfig, Trajectory, bo_auglag, run_strategy


def _random_baseline(problem, restarts=100, budget=100):
    cfg = ExperimentConfig.from_dict(
        dict(problem=problem, strategy="random", restarts=restarts, budget=budget, seed=0)
    )
    return run_experiment(cfg)


def test_random_baseline_version1(acceptance):
    t0 = time.perf_counter()
    agg = _random_baseline("v1")
    dt = time.perf_counter() - t0
    ok = abs(agg.final_mean - (-0.874)) <= 0.02 and dt < 5
    acceptance.record(1, ok, f"v1 random mean {agg.final_mean:.4f} (target -0.874 +- 0.02), {dt:.2f}s")
    assert abs(agg.final_mean - (-0.874)) <= 0.02
    assert dt < 5


def test_random_baseline_versions_2_and_3(acceptance):
    t0 = time.perf_counter()
    v2 = _random_baseline("v2")
    v3 = _random_baseline("v3")
    dt = time.perf_counter() - t0
    ok2 = abs(v2.final_mean - 0.0014) <= 0.0015
    ok3 = abs(v3.final_mean - 0.046) <= 0.015
    acceptance.record(
        2,
        ok2 and ok3 and dt < 10,
        f"v2 {v2.final_mean:.5f} (0.0014 +- 0.0015), v3 {v3.final_mean:.4f} (0.046 +- 0.015), {dt:.2f}s",
    )
    assert v2.n_excluded == 0 and v3.n_excluded == 0
    assert ok2
    assert ok3
    assert dt < 10


RHOS = (10.0, 1.0, 0.1, 0.01)


def test_nomax_gradient_identity(acceptance):
    # The required closed form is -1.5/rho; differentiating the reduced
    # objective gives 2x(x^2 - 1)/rho, i.e. -0.75/rho at x = 0.5.
    grads = {rho: float(counterexample_penalized_grad(0.5, rho)) for rho in RHOS}
    ok = all(grads[rho] == -1.5 / rho for rho in RHOS)
    acceptance.record(
        3,
        ok,
        "grad(0.5) vs -1.5/rho: " + ", ".join(f"rho={r:g}: {grads[r]:.6g} vs {-1.5 / r:.6g}" for r in RHOS),
    )
    for rho in RHOS:
        assert grads[rho] == -1.5 / rho


def test_nomax_minimizer_displacement(acceptance):
    t0 = time.perf_counter()
    xs = {rho: counterexample_minimizer(rho) for rho in RHOS}
    grid = np.linspace(-1.0, 1.0, 200_001)
    oracle = grid[np.argmin(counterexample_penalized(grid, 0.1))]
    dt = time.perf_counter() - t0
    near_boundary = abs(xs[0.1] - 1.0) <= 0.05 and abs(oracle - 1.0) <= 0.05 and abs(xs[0.1] - oracle) <= 1e-4
    displaced = all(abs(x - 0.5) > 1e-3 for x in xs.values())
    acceptance.record(
        3,
        near_boundary and displaced and dt < 1,
        "argmin " + ", ".join(f"rho={r:g}: {x:.4f}" for r, x in xs.items()) + f", grid oracle {oracle:.4f}, {dt:.2f}s",
    )
    assert near_boundary
    assert displaced
    assert dt < 1


def test_withmax_saddle_recovers_minimizer(acceptance):
    p = make_counterexample_1d()
    t0 = time.perf_counter()
    rows = []
    for rho in (10.0, 1.0, 0.1):
        x, rep = al_saddle_check(p, ALState([0.0], rho, Variant.WITHMAX))
        rows.append((rho, x[0], rep.max_residual()))
    x_nm, _ = al_saddle_check(p, ALState([0.0], 0.1, Variant.NOMAX))
    dt = time.perf_counter() - t0
    wm_ok = all(abs(x - 0.5) <= 1e-4 and r <= 1e-4 for _, x, r in rows)
    nm_ok = abs(x_nm[0] - 0.5) >= 0.3
    acceptance.record(
        4,
        wm_ok and nm_ok and dt < 5,
        "withmax " + ", ".join(f"rho0={r:g}: x={x:.6f} kkt={k:.1e}" for r, x, k in rows)
        + f"; nomax rho0=0.1: x={x_nm[0]:.4f}; {dt:.2f}s",
    )
    assert wm_ok
    assert nm_ok
    assert dt < 5


def test_lmc_construction(acceptance):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_rec = worst_gram = 0.0
    for _ in range(100):
        n, m = int(rng.integers(5, 51)), int(rng.choice([2, 3]))
        C = rng.normal(size=(n, m)) * rng.uniform(0.1, 10, size=m)
        U, s, Vt = economy_svd(C)
        A = Vt.T * s
        worst_rec = max(worst_rec, np.linalg.norm(U @ A.T - C))
        worst_gram = max(worst_gram, np.abs(U.T @ U - np.eye(m)).max())

    p = make_toy_original()
    X = lhs_sample(25, 2, seed=1)
    model = lmc_fit(X, p.constraint_values(X))
    k = 1_000_000
    worst_z = 0.0
    for j, x in enumerate(rng.uniform(size=(10, 2))):
        S = lmc_predict(model, x).covariance
        draws = lmc_sample(model, x, k, seed=j)
        emp = np.cov(draws.T)
        se = np.sqrt((np.outer(np.diag(S), np.diag(S)) + S**2) / k)
        worst_z = max(worst_z, float(np.max(np.abs(emp - S) / se)))
    dt = time.perf_counter() - t0
    ok = worst_rec <= 1e-10 and worst_gram <= 1e-12 and worst_z <= 3 and dt < 30
    acceptance.record(
        5, ok, f"max recon {worst_rec:.1e}, max Gram dev {worst_gram:.1e}, max cov z {worst_z:.2f}, {dt:.1f}s"
    )
    assert worst_rec <= 1e-10
    assert worst_gram <= 1e-12
    assert worst_z <= 3
    assert dt < 30


def test_toy_constraint_correlation(acceptance):
    t0 = time.perf_counter()
    r = correlation_estimate(make_toy_original(), 0, 1, n=10_000, seed=0)
    dt = time.perf_counter() - t0
    ok = -0.85 <= r <= -0.75 and dt < 1
    acceptance.record(6, ok, f"corr(c1, c2) = {r:.4f}, {dt:.2f}s")
    assert -0.85 <= r <= -0.75
    assert dt < 1


@pytest.mark.slow
def test_bo_variant_ordering(acceptance, artifact_dir):
    t0 = time.perf_counter()
    results = {}
    for variant in ("nomax", "withmax"):
        cfg = ExperimentConfig.from_dict(
            dict(problem="v2", strategy=variant, restarts=20, n_init=10, budget=110, seed=0,
                 out=str(artifact_dir / "v2_bo" / variant))
        )
        results[variant] = run_experiment(cfg)
    dt = time.perf_counter() - t0
    nm, wm = results["nomax"].final_mean, results["withmax"].final_mean
    emit_plot([results["nomax"], results["withmax"]], ["nomax", "withmax"], artifact_dir / "v2_bo" / "convergence.svg")
    render_convergence([results["nomax"], results["withmax"]], ["nomax", "withmax"], artifact_dir / "v2_bo" / "convergence.png")
    ok = wm <= nm and max(wm, nm) <= 0.05 and dt < 600
    acceptance.record(7, ok, f"v2 withmax {wm:.5f} <= nomax {nm:.5f}, both <= 0.05, {dt:.0f}s")
    assert wm <= nm
    assert max(wm, nm) <= 0.05
    assert dt < 600


def test_property_suite(acceptance, tmp_path):
    parts = {}
    rng = np.random.default_rng(8)

    # best-feasible monotonicity, 50 seeds x 3 strategies
    toy = make_toy_original()
    mono = True
    for strategy in ("random", "nomax", "withmax"):
        for seed in range(50):
            t = run_strategy(toy, strategy, StrategyConfig(n_init=3, n_iter=3, candidate_count=40, mc_draws=50, seed=seed))
            vals = [v for v in t.best_feasible if v is not None]
            mono &= all(a >= b for a, b in zip(vals, vals[1:]))
    parts["monotone"] = mono

    # AL dominance on 10,000 random tuples
    n = 10_000
    f = rng.normal(size=n)
    C = rng.normal(size=(n, 3)) * 2
    C[: n // 10] = np.abs(C[: n // 10])  # guarantee some all-nonnegative rows
    dom = eq = True
    for i in range(n):
        lam, rho = rng.uniform(0, 5, size=3), rng.uniform(1e-3, 10)
        wm = al_value(f[i], C[i], ALState(lam, rho, Variant.WITHMAX))
        nm = al_value(f[i], C[i], ALState(lam, rho, Variant.NOMAX))
        dom &= wm <= nm
        eq &= (wm == nm) == bool(np.all(C[i] >= 0))
    parts["al dominance"] = dom and eq

    # GP interpolation and variance non-negativity
    X = lhs_sample(15, 2, seed=3)
    y = np.sin(4 * X[:, 0]) + X[:, 1]
    gp = gp_fit(X, y, nugget=1e-12)
    mean, _ = gp.predict(X)
    _, var = gp.predict(rng.uniform(-0.5, 1.5, size=(10_000, 2)))
    parts["gp"] = bool(np.abs(mean - y).max() <= 1e-4 and np.all(var >= 0))

    # EI non-negativity and degenerate exactness
    Cv = toy.constraint_values(X)
    bundle = SurrogateBundle(lmc_fit(X, Cv), toy.objective)
    s = ALState([0.4, 0.1], 0.5, Variant.NOMAX)
    ei = ei_batch(bundle, lhs_sample(500, 2, seed=4), s, best_al=0.7, k=300, seed=1)

    class Flat:
        def predict(self, Xq):
            return np.full(len(Xq), -1.0), np.zeros(len(Xq))

    flat = SurrogateBundle(IndependentModel(score_gps=(Flat(),), A=np.eye(1)), lambda Xq: np.full(len(Xq), 0.2))
    degenerate = ei_montecarlo(flat, np.zeros(2), ALState([0.0], 1.0, Variant.WITHMAX), best_al=0.5, k=10)
    parts["ei"] = bool(np.all(ei >= 0) and degenerate == pytest.approx(0.3, abs=1e-15))

    # CSV round trip
    t = bo_auglag(toy, StrategyConfig(n_init=4, n_iter=3, candidate_count=40, mc_draws=50, seed=5))
    write_csv(t, tmp_path / "t.csv")
    back: Trajectory = read_csv(tmp_path / "t.csv")
    rt = all(
        np.abs(a.x - b.x).max() <= 1e-12 and abs(a.f - b.f) <= 1e-12 and np.abs(a.c - b.c).max() <= 1e-12
        for a, b in zip(t.evaluations, back.evaluations)
    ) and all(abs(a.rho - b.rho) <= 1e-12 and np.abs(a.lam - b.lam).max() <= 1e-12 for a, b in zip(t.al_states, back.al_states))
    parts["csv round trip"] = rt

    # end-to-end determinism
    outs = []
    for tag in ("a", "b"):
        cfg = ExperimentConfig.from_dict(dict(problem="toy", strategy="withmax", restarts=2, n_init=4, budget=9,
                                              candidate_count=60, mc_draws=80, seed=3, out=str(tmp_path / tag)))
        run_experiment(cfg)
        outs.append([(tmp_path / tag / f).read_bytes() for f in ("restart_000.csv", "restart_001.csv", "aggregate.csv")])
    parts["determinism"] = outs[0] == outs[1]

    ok = all(parts.values())
    acceptance.record(8, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in parts.items()))
    assert parts == {k: True for k in parts}


@pytest.mark.slow
def test_lmc_does_no_harm(acceptance, artifact_dir):
    toy = make_toy_original()
    t0 = time.perf_counter()
    aggs = {}
    for surrogate in ("indep", "lmc"):
        trajs = [
            bo_auglag(toy, StrategyConfig(n_init=20, n_iter=90, surrogate=surrogate, variant="withmax", seed=seed))
            for seed in range(5)
        ]
        aggs[surrogate] = aggregate(trajs, label=f"toy/withmax/{surrogate}")
    dt = time.perf_counter() - t0
    diff = aggs["lmc"].mean_trajectory - aggs["indep"].mean_trajectory
    both = ~np.isnan(diff)
    worst = float(np.max(diff[both])) if both.any() else float("nan")
    out = artifact_dir / "toy_lmc"
    out.mkdir(exist_ok=True)
    series = [aggs["indep"], aggs["lmc"]]
    emit_plot(series, ["independent", "lmc"], out / "comparison.svg")
    render_convergence(series, ["independent", "lmc"], out / "comparison.png")
    for a, name in zip(series, ("indep", "lmc")):
        (out / name).mkdir(exist_ok=True)
        write_csv(a, out / name / "aggregate.csv")
    ok = both.any() and worst <= 0.05
    acceptance.record(
        9,
        ok,
        f"final indep {aggs['indep'].final_mean:.4f}, lmc {aggs['lmc'].final_mean:.4f}, "
        f"max (lmc - indep) {worst:.4f} over {int(both.sum())} evals, {dt:.0f}s",
    )
    assert both.any()
    assert worst <= 0.05
