"""Acquisition over surrogate-composed augmented Lagrangian values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .auglag import ALState, Variant, al_value

ACQUISITION_IDS = ("ei-mc", "ey-nomax")
DEFAULT_DRAWS = 1000


@dataclass(frozen=True)
class SurrogateBundle:
    """Constraint surrogate plus the objective.

    ``constraint_model`` is an :class:`~albo.lmc.IndependentModel` or
    :class:`~albo.lmc.LMCModel` (anything with ``latent``, ``draws`` and
    ``predict``). ``objective`` is either a cheap vectorized callable or an
    emulator with ``predict(X) -> (mean, var)``.
    """

    constraint_model: Any
    objective: Callable | Any

    @property
    def emulated_objective(self) -> bool:
        return hasattr(self.objective, "predict")

    @property
    def n_constraints(self) -> int:
        return self.constraint_model.n_outputs


def _check_fitted(b: SurrogateBundle) -> None:
    if b.constraint_model is None or b.objective is None:
        raise ValueError("surrogate bundle is not fitted")


def al_draws(b: SurrogateBundle, X, s: ALState, k: int, seed) -> np.ndarray:
    """AL values for ``k`` joint posterior draws at each row of ``X``, shape ``(n, k)``.

    All rows share one block of standard normals (common random numbers),
    which keeps comparisons between candidates low-variance and makes the
    result independent of row order.
    """
    _check_fitted(b)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = b.n_constraints
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((k, m + (1 if b.emulated_objective else 0)))
    mu, var = b.constraint_model.latent(X)
    c = b.constraint_model.draws(mu, var, z[:, :m])
    if b.emulated_objective:
        fm, fv = b.objective.predict(X)
        f = fm[:, None] + np.sqrt(fv)[:, None] * z[None, :, m]
    else:
        f = np.broadcast_to(np.asarray(b.objective(X), dtype=float)[:, None], c.shape[:2])
    return al_value(f, c, s)


def ei_batch(b: SurrogateBundle, X, s: ALState, best_al: float, k: int = DEFAULT_DRAWS, seed=0):
    """Monte Carlo expected improvement of the AL below ``best_al`` at each row of ``X``."""
    if k < 1:
        raise ValueError("need at least one draw")
    draws = al_draws(b, X, s, k, seed)
    return np.mean(np.maximum(0.0, best_al - draws), axis=1)


def ei_montecarlo(b: SurrogateBundle, x, s: ALState, best_al: float, k: int = DEFAULT_DRAWS, seed=0) -> float:
    x = np.asarray(x, dtype=float)
    return float(ei_batch(b, x[None, :], s, best_al, k, seed)[0])


def expected_al_nomax_batch(b: SurrogateBundle, X, s: ALState) -> np.ndarray:
    if s.variant is not Variant.NOMAX:
        raise ValueError("the expected AL has a closed form only for the no-max variant")
    _check_fitted(b)
    if b.emulated_objective:
        raise ValueError("closed-form expected AL assumes a known objective")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mean, cov = b.constraint_model.predict(X)
    second_moment = mean**2 + np.diagonal(cov, axis1=1, axis2=2)
    f = np.asarray(b.objective(X), dtype=float)
    return f + mean @ s.lam + np.sum(second_moment, axis=1) / (2.0 * s.rho)


def expected_al_nomax(b: SurrogateBundle, x, s: ALState) -> float:
    """Posterior mean of the no-max AL, using ``E[c_i^2] = mu_i^2 + var_i``."""
    x = np.asarray(x, dtype=float)
    return float(expected_al_nomax_batch(b, x[None, :], s)[0])


def select_next(
    b: SurrogateBundle,
    s: ALState,
    best_al: float,
    candidates,
    k: int = DEFAULT_DRAWS,
    seed=0,
    acquisition: str = "ei-mc",
) -> tuple[np.ndarray, float]:
    """Best candidate row and its score.

    ``"ei-mc"`` maximizes Monte Carlo EI; when every candidate scores zero it
    falls back to the lowest mean AL over the same draws. ``"ey-nomax"``
    minimizes the closed-form expected no-max AL and reports its negation.
    Ties go to the lowest row index.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ValueError("empty candidate set")
    if acquisition == "ey-nomax":
        score = -expected_al_nomax_batch(b, candidates, s)
    elif acquisition == "ei-mc":
        draws = al_draws(b, candidates, s, k, seed)
        score = np.mean(np.maximum(0.0, best_al - draws), axis=1)
        if not np.any(score > 0):
            score = -np.mean(draws, axis=1)
    else:
        raise ValueError(f"unknown acquisition {acquisition!r}; expected one of {ACQUISITION_IDS}")
    i = int(np.argmax(score))
    return candidates[i].copy(), float(score[i])
