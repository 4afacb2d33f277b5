"""Single-output Gaussian process regression and Latin hypercube designs.

The covariance is an anisotropic squared exponential scaled by the signal
variance, with a nugget expressed relative to that variance::

    K = s2 * (R + nugget * I),   R_ij = exp(-sum_k (x_ik - x_jk)^2 / (2 l_k^2))

The signal variance is profiled out of the likelihood (closed-form maximizer,
clipped to its bounds), so the numerical search runs over log-lengthscales only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

LENGTHSCALE_BOUNDS = (1e-2, 1e2)
SIGNAL_VARIANCE_BOUNDS = (1e-6, 1e2)
DEFAULT_NUGGET = 1e-8
MAX_NUGGET = 1e-4
N_STARTS = 5


class GPFitError(RuntimeError):
    """Raised when the training covariance cannot be factorized."""


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float


@dataclass(frozen=True, eq=False)
class GPModel:
    X: np.ndarray
    y: np.ndarray
    lengthscales: np.ndarray
    signal_variance: float
    nugget: float
    mean_offset: float
    factor: np.ndarray  # lower Cholesky factor of R + nugget * I
    alpha: np.ndarray  # (R + nugget * I)^{-1} (y - mean_offset)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent-function variance at the rows of ``Xq``."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.dim:
            raise ValueError(f"query dimension {Xq.shape[1]} != model dimension {self.dim}")
        Kq = correlation(Xq, self.X, self.lengthscales)
        mean = self.mean_offset + Kq @ self.alpha
        v = solve_triangular(self.factor, Kq.T, lower=True, check_finite=False)
        var = self.signal_variance * (1.0 - np.einsum("ij,ij->j", v, v))
        return mean, np.maximum(var, 0.0)

    def hyperparameters(self) -> dict:
        return {
            "lengthscales": self.lengthscales.tolist(),
            "signal_variance": self.signal_variance,
            "nugget": self.nugget,
            "mean_offset": self.mean_offset,
        }


def lhs_sample(n: int, d: int, seed=None) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in ``[0, 1)^d``.

    Each column holds exactly one point in every interval ``[k/n, (k+1)/n)``.
    """
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    return (strata + rng.uniform(size=(n, d))) / n


def correlation(A: np.ndarray, B: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    A = A / lengthscales
    B = B / lengthscales
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    return np.exp(-0.5 * np.maximum(sq, 0.0))


def _factor(R: np.ndarray, nugget: float) -> tuple[np.ndarray, float]:
    """Cholesky of ``R + nugget*I``, escalating the nugget tenfold on failure."""
    diag = np.diag_indices_from(R)
    g = nugget
    while True:
        A = R.copy()
        A[diag] += g
        L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=1)
        if info == 0:
            return L, g
        if g >= MAX_NUGGET:
            raise GPFitError(f"covariance not positive definite even with nugget {g:g}")
        g = min(max(g, 1e-12) * 10.0, MAX_NUGGET)


def _cho_inverse(L: np.ndarray) -> np.ndarray:
    inv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise GPFitError(f"dpotri failed with info={info}")
    # L has a zero upper triangle, so dpotri leaves zeros there.
    out = inv + inv.T
    out.flat[:: out.shape[0] + 1] *= 0.5
    return out


def _pairwise_sq(X: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape ``(d, n, n)``."""
    return (X.T[:, :, None] - X.T[:, None, :]) ** 2


def _profiled_nll(log_ls, D, yc, nugget, with_grad=True):
    """Negative log marginal likelihood with the signal variance profiled out.

    ``D`` holds the flattened per-dimension squared differences, ``(d, n*n)``.
    """
    n = yc.size
    inv_ls2 = np.exp(-2.0 * log_ls)
    R = np.exp(-0.5 * (inv_ls2 @ D)).reshape(n, n)
    try:
        L, g = _factor(R, nugget)
    except GPFitError:
        return (1e25, np.zeros_like(log_ls)) if with_grad else 1e25
    alpha, _ = lapack.dpotrs(L, yc, lower=1)
    s2 = np.clip(yc @ alpha / n, *SIGNAL_VARIANCE_BOUNDS)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    nll = 0.5 * (yc @ alpha / s2 + logdet + n * np.log(2.0 * np.pi * s2))
    if not with_grad:
        return nll
    WR = (_cho_inverse(L) - np.outer(alpha, alpha) / s2) * R
    grad = 0.5 * inv_ls2 * (D @ WR.ravel())
    return nll, grad


def log_marginal_likelihood(m: GPModel) -> float:
    """Gaussian log marginal likelihood of the training outputs under ``m``."""
    yc = m.y - m.mean_offset
    n = yc.size
    s2 = m.signal_variance
    logdet = 2.0 * np.sum(np.log(np.diag(m.factor))) + n * np.log(s2)
    return float(-0.5 * (yc @ m.alpha / s2 + logdet + n * np.log(2.0 * np.pi)))


def log_marginal_likelihood_grad(m: GPModel) -> np.ndarray:
    """Gradient of :func:`log_marginal_likelihood` in ``(log l_1..log l_d, log s2)``."""
    yc = m.y - m.mean_offset
    n = yc.size
    s2 = m.signal_variance
    W = _cho_inverse(m.factor) - np.outer(m.alpha, m.alpha) / s2
    R = correlation(m.X, m.X, m.lengthscales)
    grad = np.empty(m.dim + 1)
    for k in range(m.dim):
        D = (m.X[:, k, None] - m.X[None, :, k]) ** 2
        grad[k] = -0.5 * np.sum(W * (R * D / m.lengthscales[k] ** 2))
    grad[-1] = 0.5 * (yc @ m.alpha / s2 - n)
    return grad


def _assemble(X, y, ls, nugget, mean_offset, signal_variance=None) -> GPModel:
    yc = y - mean_offset
    R = correlation(X, X, ls)
    L, g = _factor(R, nugget)
    alpha = cho_solve((L, True), yc, check_finite=False)
    if signal_variance is None:
        signal_variance = float(np.clip(yc @ alpha / y.size, *SIGNAL_VARIANCE_BOUNDS))
    if g != nugget:
        logger.debug("nugget escalated from %g to %g", nugget, g)
    return GPModel(
        X=X,
        y=y,
        lengthscales=np.asarray(ls, dtype=float),
        signal_variance=float(signal_variance),
        nugget=g,
        mean_offset=float(mean_offset),
        factor=L,
        alpha=alpha,
    )


def gp_fit(
    X,
    y,
    nugget: float = DEFAULT_NUGGET,
    n_starts: int = N_STARTS,
    seed: int = 0,
    lengthscales: Optional[np.ndarray] = None,
    signal_variance: Optional[float] = None,
    mean_offset: Optional[float] = None,
) -> GPModel:
    """Fit a GP by maximizing the marginal likelihood from several starts.

    Passing ``lengthscales`` (and optionally ``signal_variance`` and
    ``mean_offset``) skips the search and conditions on the data with those
    hyperparameters.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} inputs but {y.size} outputs")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    if mean_offset is None:
        mean_offset = float(np.mean(y))

    if lengthscales is not None:
        ls = np.broadcast_to(np.asarray(lengthscales, dtype=float), (X.shape[1],)).copy()
        return _assemble(X, y, ls, nugget, mean_offset, signal_variance)

    if y.size < 2:
        raise ValueError("hyperparameter fitting needs at least two observations")
    d = X.shape[1]
    yc = y - mean_offset
    D = _pairwise_sq(X).reshape(d, -1)
    log_lo, log_hi = np.log(LENGTHSCALE_BOUNDS)
    bounds = [(log_lo, log_hi)] * d

    # First start: lengthscale proportional to the data spread, the rest
    # from a seeded Latin hypercube over a sensible sub-range.
    spread = np.ptp(X, axis=0)
    spread[spread <= 0] = 1.0
    starts = [np.log(np.clip(0.3 * spread, *LENGTHSCALE_BOUNDS))]
    if n_starts > 1:
        u = lhs_sample(n_starts - 1, d, seed=seed)
        starts.extend(np.log(1e-2) * (1 - u) + np.log(1e1) * u)

    best = None
    for x0 in starts:
        res = minimize(
            _profiled_nll,
            x0,
            args=(D, yc, nugget),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 200, "ftol": 1e-8},
        )
        if best is None or res.fun < best.fun:
            best = res
    ls = np.exp(np.clip(best.x, log_lo, log_hi))
    return _assemble(X, y, ls, nugget, mean_offset, signal_variance)


def gp_predict(m: GPModel, x) -> Prediction:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("gp_predict takes a single point; use GPModel.predict for batches")
    mean, var = m.predict(x[None, :])
    return Prediction(float(mean[0]), float(var[0]))
