"""Test problems for constrained black-box minimization.

Every objective and constraint is written against ``x[..., i]`` so the same
callable accepts a single point of shape ``(d,)`` or a batch ``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Func = Callable[[np.ndarray], np.ndarray]

PROBLEM_IDS = ("toy", "v1", "v2", "v3", "counterexample-1d")

# Maximum of the Version 2 objective over the unit square, attained at (0, 0).
V2_OBJECTIVE_MAX = 0.54

# Optimum of the original toy problem. Not given in closed form; obtained by a
# 2001x2001 grid search followed by SLSQP refinement (see tests/test_problems.py,
# which re-derives it).
TOY_OPTIMUM_VALUE = 0.5997880520
TOY_OPTIMUM_X = (0.1951226886, 0.4046653634)


@dataclass(frozen=True)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length >= 1")
        if not np.all(lower < upper):
            raise ValueError("need lower < upper in every dimension")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map points of the unit cube affinely onto the box."""
        return self.lower + np.asarray(u) * (self.upper - self.lower)

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.lower) / (self.upper - self.lower)


@dataclass(frozen=True)
class ConstrainedProblem:
    """Minimize ``objective(x)`` subject to ``c_i(x) <= 0`` for ``x`` in a box."""

    objective: Func
    constraints: tuple
    domain: BoxDomain
    known_optimum: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        constraints = tuple(self.constraints)
        if len(constraints) < 1:
            raise ValueError("a constrained problem needs at least one constraint")
        object.__setattr__(self, "constraints", constraints)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        """Constraint values with the constraint index on the last axis."""
        x = np.asarray(x, dtype=float)
        return np.stack([np.asarray(c(x), dtype=float) for c in self.constraints], axis=-1)


@dataclass(frozen=True)
class Evaluation:
    x: np.ndarray
    f: float
    c: np.ndarray
    feasible: bool = field(default=False)


def _check_in_domain(p: ConstrainedProblem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.dim:
        raise ValueError(f"expected points of dimension {p.dim}, got {x.shape[-1]}")
    if np.any(x < p.domain.lower) or np.any(x > p.domain.upper):
        raise ValueError(f"point {x} lies outside the domain")
    return x


def evaluate(p: ConstrainedProblem, x) -> Evaluation:
    x = _check_in_domain(p, x).copy()
    c = p.constraint_values(x)
    return Evaluation(x=x, f=float(p.objective(x)), c=c, feasible=bool(np.max(c) <= 0.0))


def evaluate_batch(p: ConstrainedProblem, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`evaluate`: returns ``(f, C, feasible)`` for rows of ``X``."""
    X = _check_in_domain(p, np.atleast_2d(X))
    f = np.asarray(p.objective(X), dtype=float)
    C = p.constraint_values(X)
    return f, C, np.max(C, axis=-1) <= 0.0


def is_feasible(p: ConstrainedProblem, x) -> bool:
    return evaluate(p, x).feasible


# -- the toy problem and its variants ---------------------------------------


def toy_c1(x):
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    return 1.5 - x1 - 2.0 * x2 - 0.5 * np.sin(2.0 * np.pi * (x1**2 - 2.0 * x2))


def toy_c2(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] ** 2 + x[..., 1] ** 2 - 1.5


def _linear_sum(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] + x[..., 1]


def _linear_diff(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] - x[..., 1]


def v2_objective(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (x[..., 0] - 0.6) ** 2 + (x[..., 1] - 0.6) ** 2


def _unit_box(d: int) -> BoxDomain:
    return BoxDomain(np.zeros(d), np.ones(d))


def make_toy_original() -> ConstrainedProblem:
    return ConstrainedProblem(
        objective=_linear_sum,
        constraints=(toy_c1, toy_c2),
        domain=_unit_box(2),
        known_optimum=(TOY_OPTIMUM_VALUE, TOY_OPTIMUM_X),
        name="toy",
    )


def make_version(k: int, x3_upper: float = V2_OBJECTIVE_MAX) -> ConstrainedProblem:
    """Version ``k`` of the toy problem.

    1: linear objective ``x1 - x2``, optimum -1 at the box corner (0, 1).
    2: quadratic objective with interior optimum 0 at (0.6, 0.6).
    3: Version 2 rewritten with a slack variable ``x3 >= q(x1, x2)`` and
       objective ``x3``.  ``x3`` ranges over ``[0, x3_upper]``; the default is
       the maximum of ``q`` over the unit square.
    """
    if k == 1:
        return ConstrainedProblem(
            objective=_linear_diff,
            constraints=(toy_c1, toy_c2),
            domain=_unit_box(2),
            known_optimum=(-1.0, (0.0, 1.0)),
            name="v1",
        )
    if k == 2:
        return ConstrainedProblem(
            objective=v2_objective,
            constraints=(toy_c1, toy_c2),
            domain=_unit_box(2),
            known_optimum=(0.0, (0.6, 0.6)),
            name="v2",
        )
    if k == 3:
        p = slack_linearize(make_version(2), (0.0, x3_upper))
        return ConstrainedProblem(
            objective=p.objective,
            constraints=p.constraints,
            domain=p.domain,
            known_optimum=(0.0, (0.6, 0.6, 0.0)),
            name="v3",
        )
    raise ValueError(f"unknown toy problem version {k!r}; expected 1, 2 or 3")


def slack_linearize(p: ConstrainedProblem, r_bounds: Sequence[float]) -> ConstrainedProblem:
    """Rewrite ``min f(x)`` as ``min r`` s.t. ``f(x) - r <= 0``.

    The returned problem lives in ``d + 1`` dimensions with ``r`` as the last
    coordinate. ``r_bounds`` must cover the range of ``f`` over the domain or
    the transform can cut off feasible points.
    """
    r_lo, r_hi = float(r_bounds[0]), float(r_bounds[1])
    d = p.dim
    f = p.objective

    def last_coordinate(x):
        return np.asarray(x, dtype=float)[..., d]

    def wrap(g):
        return lambda x: g(np.asarray(x, dtype=float)[..., :d])

    def epigraph(x):
        x = np.asarray(x, dtype=float)
        return f(x[..., :d]) - x[..., d]

    optimum = None
    if p.known_optimum is not None:
        value, loc = p.known_optimum
        optimum = (value, tuple(loc) + (value,))
    return ConstrainedProblem(
        objective=last_coordinate,
        constraints=tuple(wrap(g) for g in p.constraints) + (epigraph,),
        domain=BoxDomain(
            np.append(p.domain.lower, r_lo), np.append(p.domain.upper, r_hi)
        ),
        known_optimum=optimum,
        name=f"{p.name}-slack" if p.name else "slack",
    )


# -- one-dimensional counterexample -----------------------------------------


def make_counterexample_1d() -> ConstrainedProblem:
    return ConstrainedProblem(
        objective=lambda x: (np.asarray(x, dtype=float)[..., 0] - 0.5) ** 2,
        constraints=(lambda x: np.asarray(x, dtype=float)[..., 0] ** 2 - 1.0,),
        domain=BoxDomain([-1.0], [1.0]),
        known_optimum=(0.0, (0.5,)),
        name="counterexample-1d",
    )


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return rho


def counterexample_penalized(x, rho: float):
    """NoMax augmented Lagrangian of the 1-d counterexample with the multiplier term dropped."""
    rho = _check_rho(rho)
    x = np.asarray(x, dtype=float)
    return (x - 0.5) ** 2 + (x**2 - 1.0) ** 2 / (2.0 * rho)


def counterexample_penalized_grad(x, rho: float):
    rho = _check_rho(rho)
    x = np.asarray(x, dtype=float)
    return 2.0 * (x - 0.5) + 2.0 * x * (x**2 - 1.0) / rho


def counterexample_minimizer(rho: float, tol: float = 1e-8) -> float:
    """Global minimizer of :func:`counterexample_penalized` over [-1, 1]."""
    from scipy.optimize import minimize_scalar

    rho = _check_rho(rho)
    grid = np.linspace(-1.0, 1.0, 4001)
    i = int(np.argmin(counterexample_penalized(grid, rho)))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(
        counterexample_penalized,
        bounds=(lo, hi),
        args=(rho,),
        method="bounded",
        options={"xatol": tol * 1e-2},
    )
    return float(res.x)


def get_problem(problem_id: str) -> ConstrainedProblem:
    """Look up a problem by its CLI id."""
    makers = {
        "toy": make_toy_original,
        "v1": lambda: make_version(1),
        "v2": lambda: make_version(2),
        "v3": lambda: make_version(3),
        "counterexample-1d": make_counterexample_1d,
    }
    try:
        return makers[problem_id]()
    except KeyError:
        raise KeyError(
            f"unknown problem id {problem_id!r}; choose from {', '.join(PROBLEM_IDS)}"
        ) from None
