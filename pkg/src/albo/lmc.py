"""Correlated constraint surrogates.

Two constraint models share one interface: independent latent GPs ``u_i``
mixed by a fixed matrix ``A`` so that ``c(x) = A u(x)``.

* :class:`IndependentModel` fits one GP per constraint, ``A = I``.
* :class:`LMCModel` takes the economy SVD ``C = U S V^T`` of the observed
  constraint matrix, sets ``A = V S`` and fits one GP to each column of ``U``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gp import gp_fit
from .problems import ConstrainedProblem

RANK_TOL = 1e-12


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class JointPrediction:
    mean: np.ndarray
    covariance: np.ndarray


class _MixedGPs:
    """Shared prediction and sampling for ``c = A u`` with independent ``u_i``."""

    A: np.ndarray
    score_gps: tuple

    @property
    def n_outputs(self) -> int:
        return self.A.shape[0]

    def latent(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Latent means and variances, each of shape ``(n_query, m)``."""
        pairs = [gp.predict(Xq) for gp in self.score_gps]
        mu = np.column_stack([p[0] for p in pairs])
        var = np.column_stack([p[1] for p in pairs])
        return mu, var

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Joint means ``(n, m)`` and covariances ``(n, m, m)`` of the constraints."""
        mu, var = self.latent(Xq)
        mean = mu @ self.A.T
        cov = np.einsum("ik,nk,jk->nij", self.A, var, self.A)
        return mean, cov

    def draws(self, mu: np.ndarray, var: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Map standard normals ``z`` of shape ``(k, m)`` to constraint draws ``(n, k, m)``."""
        u = mu[:, None, :] + np.sqrt(var)[:, None, :] * z[None, :, :]
        if isinstance(self, IndependentModel):
            return u
        n, k, m = u.shape
        return (u.reshape(n * k, m) @ self.A.T).reshape(n, k, m)


@dataclass(frozen=True, eq=False)
class IndependentModel(_MixedGPs):
    score_gps: tuple
    A: np.ndarray


@dataclass(frozen=True, eq=False)
class LMCModel(_MixedGPs):
    A: np.ndarray
    score_gps: tuple
    n_obs: int
    U: np.ndarray


def fit_independent(X, C, seed: int = 0, **gp_kwargs) -> IndependentModel:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    gps = tuple(gp_fit(X, C[:, j], seed=seed, **gp_kwargs) for j in range(C.shape[1]))
    return IndependentModel(score_gps=gps, A=np.eye(C.shape[1]))


def economy_svd(C) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Economy SVD with a pinned sign: the largest-magnitude entry of each U column is positive."""
    U, s, Vt = np.linalg.svd(np.asarray(C, dtype=float), full_matrices=False)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, s, (Vt.T * signs).T


def lmc_fit(X, C, seed: int = 0, **gp_kwargs) -> LMCModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n, m = C.shape
    if n < m:
        raise ValueError(f"need at least as many observations as outputs, got n={n}, m={m}")
    U, s, Vt = economy_svd(C)
    if s[-1] < RANK_TOL * s[0]:
        raise RankDeficientError(
            f"constraint matrix is rank deficient (singular values {s})"
        )
    A = Vt.T * s
    gps = tuple(gp_fit(X, U[:, j], seed=seed, **gp_kwargs) for j in range(m))
    return LMCModel(A=A, score_gps=gps, n_obs=n, U=U)


def lmc_predict(model: _MixedGPs, x) -> JointPrediction:
    x = np.asarray(x, dtype=float)
    mean, cov = model.predict(x[None, :])
    return JointPrediction(mean=mean[0], covariance=cov[0])


def lmc_sample(model: _MixedGPs, x, k: int, seed=None) -> np.ndarray:
    """``k`` joint draws of the constraint vector at ``x``, shape ``(k, m)``."""
    rng = np.random.default_rng(seed)
    mu, var = model.latent(np.asarray(x, dtype=float)[None, :])
    z = rng.standard_normal((k, model.n_outputs))
    return model.draws(mu, var, z)[0]


def correlation_estimate(
    p: ConstrainedProblem, i: int, j: int, n: int = 1000, seed=None
) -> float:
    """Pearson correlation of constraints ``i`` and ``j`` over uniform samples of the domain."""
    m = p.n_constraints
    if n < 2:
        raise ValueError("need at least two samples")
    if not (0 <= i < m and 0 <= j < m):
        raise IndexError(f"constraint indices must lie in [0, {m})")
    rng = np.random.default_rng(seed)
    X = p.domain.from_unit(rng.uniform(size=(n, p.dim)))
    ci = np.asarray(p.constraints[i](X), dtype=float)
    cj = np.asarray(p.constraints[j](X), dtype=float)
    if np.ptp(ci) == 0 or np.ptp(cj) == 0:
        raise ValueError("constraint sample is constant; correlation undefined")
    if i == j:
        return 1.0
    return float(np.corrcoef(ci, cj)[0, 1])


def fit_constraint_model(kind: str, X, C, seed: int = 0):
    if kind in ("indep", "independent"):
        return fit_independent(X, C, seed=seed)
    if kind == "lmc":
        return lmc_fit(X, C, seed=seed)
    raise ValueError(f"unknown surrogate id {kind!r}; expected 'indep' or 'lmc'")

