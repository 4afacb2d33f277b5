"""Augmented Lagrangian in its classic and no-max forms.

Classic (``WITHMAX``)::

    f + lam.c + 1/(2 rho) * sum(max(0, c_i)^2)

No-max (``NOMAX``) squares every constraint value, satisfied or not::

    f + lam.c + 1/(2 rho) * sum(c_i^2)

Also a numerical KKT checker and the classical outer AL iteration with exact
inner minimization, used to show where the no-max form loses KKT points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .problems import ConstrainedProblem

RHO_FLOOR = 1e-12
PROGRESS_TOL = 1e-8
FD_STEP = 1e-6


class Variant(str, enum.Enum):
    WITHMAX = "withmax"
    NOMAX = "nomax"


@dataclass(frozen=True)
class ALState:
    lam: np.ndarray
    rho: float
    variant: Variant = Variant.WITHMAX

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float)).copy()
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError(f"multipliers must be finite and non-negative, got {lam}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "variant", Variant(self.variant))


@dataclass(frozen=True)
class KKTReport:
    stationarity: float
    feasibility: float
    complementarity: float
    multipliers: np.ndarray

    def max_residual(self) -> float:
        return max(self.stationarity, self.feasibility, self.complementarity)


def al_value(f, c, s: ALState):
    """Augmented Lagrangian value; broadcasts over leading axes of ``f`` and ``c``."""
    f = np.asarray(f, dtype=float)
    c = np.asarray(c, dtype=float)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(c))):
        raise ValueError("al_value needs finite objective and constraint values")
    pen = np.maximum(c, 0.0) if s.variant is Variant.WITHMAX else c
    out = f + np.einsum("...i,i->...", c, s.lam) + np.einsum("...i,...i->...", pen, pen) / (2.0 * s.rho)
    return float(out) if out.ndim == 0 else out


def update_multipliers(s: ALState, c_new) -> ALState:
    lam = np.maximum(0.0, s.lam + np.asarray(c_new, dtype=float) / s.rho)
    return replace(s, lam=lam)


def update_rho(s: ALState, made_feasible_progress: bool) -> ALState:
    if made_feasible_progress:
        return s
    return replace(s, rho=max(s.rho / 2.0, RHO_FLOOR))


def _fd_gradient(fun, x: np.ndarray) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        h = FD_STEP * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (float(fun(x + e)) - float(fun(x - e))) / (2.0 * h)
    return g


def kkt_residual(p: ConstrainedProblem, x, lam) -> KKTReport:
    """First-order KKT residuals at ``x`` with multipliers ``lam``.

    Gradients are central finite differences. Stationarity is measured on the
    projected Lagrangian gradient, so components pushing against an active
    box bound do not count.
    """
    x = np.asarray(x, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if not p.domain.contains(x):
        raise ValueError(f"point {x} lies outside the domain")
    if np.any(lam < 0):
        raise ValueError("multipliers must be non-negative")
    grad = _fd_gradient(p.objective, x)
    for lam_i, ci in zip(lam, p.constraints):
        if lam_i != 0.0:
            grad = grad + lam_i * _fd_gradient(ci, x)
    at_lower = (x <= p.domain.lower) & (grad > 0)
    at_upper = (x >= p.domain.upper) & (grad < 0)
    grad = np.where(at_lower | at_upper, 0.0, grad)
    c = p.constraint_values(x)
    return KKTReport(
        stationarity=float(np.linalg.norm(grad)),
        feasibility=float(max(0.0, np.max(c))),
        complementarity=float(np.max(np.abs(lam * c))),
        multipliers=lam.copy(),
    )


def least_squares_multipliers(p: ConstrainedProblem, x, active_tol: float = 1e-6) -> np.ndarray:
    """Multipliers from a non-negative least-squares fit of the active constraint gradients."""
    from scipy.optimize import nnls

    x = np.asarray(x, dtype=float)
    c = p.constraint_values(x)
    active = np.flatnonzero(np.abs(c) <= active_tol)
    lam = np.zeros(p.n_constraints)
    if active.size:
        G = np.column_stack([_fd_gradient(p.constraints[i], x) for i in active])
        lam[active], _ = nnls(G, -_fd_gradient(p.objective, x))
    return lam


def minimize_al(p: ConstrainedProblem, s: ALState, x0=None, n_grid: int = 4096, n_refine: int = 5):
    """Global minimizer of the AL over the box: dense grid, then local refinement of the best cells."""
    d = p.dim
    per_dim = max(3, int(round(n_grid ** (1.0 / d))))
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(p.domain.lower, p.domain.upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)

    def al(x):
        return al_value(p.objective(x), p.constraint_values(x), s)

    values = al(grid)
    starts = list(grid[np.argsort(values, kind="stable")[:n_refine]])
    if x0 is not None:
        starts.append(np.asarray(x0, dtype=float))
    bounds = list(zip(p.domain.lower, p.domain.upper))
    best_x, best_v = None, np.inf
    for x_start in starts:
        res = minimize(
            al,
            x_start,
            method="L-BFGS-B",
            bounds=bounds,
            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 1000},
        )
        if res.fun < best_v:
            best_x, best_v = res.x, float(res.fun)
    if best_x is None:
        raise RuntimeError("inner augmented Lagrangian minimization failed")
    return np.clip(best_x, p.domain.lower, p.domain.upper), best_v


def al_saddle_check(
    p: ConstrainedProblem, s0: ALState, x0=None, max_outer: int = 100, tol: float = 1e-7
):
    """Classical AL outer loop with exact inner minimization.

    Each outer step minimizes the AL over the box, then updates the
    multipliers and, when the new point brings no feasible improvement,
    halves rho. Stops once the minimizer and the multipliers stop moving.
    Returns the final point and its KKT report.
    """
    s = s0
    x_prev, lam_prev = None, None
    best = np.inf
    x = None
    for _ in range(max_outer):
        x, _ = minimize_al(p, s, x0=x if x is not None else x0)
        if (
            x_prev is not None
            and np.linalg.norm(x - x_prev) <= tol
            and np.array_equal(s.lam, lam_prev)
        ):
            break
        c = p.constraint_values(x)
        f = float(p.objective(x))
        feasible = bool(np.max(c) <= 0.0)
        progress = feasible and f < best - PROGRESS_TOL
        if feasible:
            best = min(best, f)
        x_prev, lam_prev = x, s.lam
        s = update_rho(update_multipliers(s, c), progress)
    return x, kkt_residual(p, x, s.lam)
