"""Random search and augmented-Lagrangian Bayesian optimization."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .acquisition import DEFAULT_DRAWS, SurrogateBundle, select_next
from .auglag import PROGRESS_TOL, ALState, Variant, al_value, update_multipliers, update_rho
from .gp import GPFitError, lhs_sample
from .lmc import RankDeficientError, fit_constraint_model
from .problems import ConstrainedProblem, Evaluation, evaluate

logger = logging.getLogger(__name__)

STRATEGY_IDS = ("random", "nomax", "withmax")
SURROGATE_IDS = ("indep", "lmc")


class SurrogateFailure(RuntimeError):
    """A restart had to be abandoned because its surrogate could not be fitted."""


@dataclass
class Trajectory:
    evaluations: list = field(default_factory=list)
    best_feasible: list = field(default_factory=list)
    al_states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    restart: Optional[int] = None

    def __len__(self) -> int:
        return len(self.evaluations)

    def record(self, ev: Evaluation, state: Optional[ALState]) -> None:
        prev = self.best_feasible[-1] if self.best_feasible else None
        best = prev
        if ev.feasible and (prev is None or ev.f < prev):
            best = ev.f
        self.evaluations.append(ev)
        self.best_feasible.append(best)
        self.al_states.append(state)

    @property
    def final_best(self) -> Optional[float]:
        return self.best_feasible[-1] if self.best_feasible else None


@dataclass
class StrategyConfig:
    n_init: int = 10
    n_iter: int = 90
    candidate_count: int = 500
    mc_draws: int = DEFAULT_DRAWS
    surrogate: str = "indep"
    variant: Variant = Variant.NOMAX
    lambda0: Optional[Sequence[float]] = None
    rho0: float = 0.5
    seed: int = 0
    acquisition: str = "ei-mc"

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.n_init < 1 or self.n_iter < 0:
            raise ValueError("need n_init >= 1 and n_iter >= 0")
        if self.surrogate not in SURROGATE_IDS:
            raise ValueError(f"unknown surrogate id {self.surrogate!r}")
        if self.candidate_count < 1 or self.mc_draws < 1:
            raise ValueError("candidate_count and mc_draws must be positive")

    @property
    def budget(self) -> int:
        return self.n_init + self.n_iter

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d


def random_search(p: ConstrainedProblem, budget: int, seed=None) -> Trajectory:
    """Evaluate ``budget`` i.i.d. uniform points of the box."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    X = p.domain.from_unit(rng.uniform(size=(budget, p.dim)))
    X = np.clip(X, p.domain.lower, p.domain.upper)
    t = Trajectory()
    for x in X:
        t.record(evaluate(p, x), None)
    return t


def best_feasible_value(t: Trajectory, at_eval: int) -> Optional[float]:
    """Best feasible objective among the first ``at_eval`` evaluations."""
    if not 1 <= at_eval <= len(t):
        raise IndexError(f"at_eval must lie in [1, {len(t)}], got {at_eval}")
    return t.best_feasible[at_eval - 1]


def current_best_al(t: Trajectory, s: ALState) -> float:
    f = np.array([ev.f for ev in t.evaluations])
    C = np.array([ev.c for ev in t.evaluations])
    return float(np.min(al_value(f, C, s)))


def _stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([seed, *tags])


def bo_auglag(p: ConstrainedProblem, cfg: StrategyConfig) -> Trajectory:
    """Augmented-Lagrangian Bayesian optimization with GP constraint surrogates.

    After a Latin hypercube initial design, each iteration refits the
    constraint surrogate to every observation, scores a fresh Latin hypercube
    candidate set by the acquisition, evaluates the winner, updates the
    multipliers with its constraint values and halves rho on stagnation
    (infeasible point or no feasible improvement).
    """
    d, m = p.dim, p.n_constraints
    if cfg.n_init < d + 1:
        raise ValueError(f"initial design needs at least d+1 = {d + 1} points")
    lam0 = np.zeros(m) if cfg.lambda0 is None else np.asarray(cfg.lambda0, dtype=float)
    if lam0.shape != (m,):
        raise ValueError(f"lambda0 must have length {m}")
    s = ALState(lam0, cfg.rho0, cfg.variant)

    t = Trajectory()
    X0 = p.domain.from_unit(lhs_sample(cfg.n_init, d, seed=_stream(cfg.seed, 0)))
    for x in X0:
        t.record(evaluate(p, x), s)

    for it in range(cfg.n_iter):
        X = np.array([ev.x for ev in t.evaluations])
        C = np.array([ev.c for ev in t.evaluations])
        try:
            model = fit_constraint_model(cfg.surrogate, X, C, seed=cfg.seed)
        except (GPFitError, RankDeficientError) as exc:
            raise SurrogateFailure(f"iteration {it}: {exc}") from exc
        bundle = SurrogateBundle(model, p.objective)
        best_al = current_best_al(t, s)
        cand = p.domain.from_unit(lhs_sample(cfg.candidate_count, d, seed=_stream(cfg.seed, 1, it)))
        x_new, score = select_next(
            bundle,
            s,
            best_al,
            cand,
            k=cfg.mc_draws,
            seed=_stream(cfg.seed, 2, it),
            acquisition=cfg.acquisition,
        )
        prev_best = t.final_best
        ev = evaluate(p, x_new)
        t.diagnostics.append(
            {
                "iteration": it,
                "best_al": best_al,
                "score": score,
                "A": model.A.tolist(),
                "gps": [gp.hyperparameters() for gp in model.score_gps],
            }
        )
        progress = ev.feasible and (prev_best is None or ev.f <= prev_best - PROGRESS_TOL)
        s = update_rho(update_multipliers(s, ev.c), progress)
        t.record(ev, s)
    return t


def run_strategy(p: ConstrainedProblem, strategy_id: str, cfg: StrategyConfig) -> Trajectory:
    if strategy_id == "random":
        return random_search(p, cfg.budget, seed=_stream(cfg.seed, 3))
    if strategy_id in ("nomax", "withmax"):
        cfg = StrategyConfig(**{**cfg.to_dict(), "variant": strategy_id})
        return bo_auglag(p, cfg)
    raise ValueError(f"unknown strategy id {strategy_id!r}; choose from {', '.join(STRATEGY_IDS)}")
