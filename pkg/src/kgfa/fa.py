"""Marginal Gaussian likelihood of factor analysis and its gradients.

With latent factors integrated out, each observation is distributed as
``N(mu, W W^T + diag(sigma^2))``. Variances are parameterised by their logs
so the optimiser works on an unconstrained space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, NumericalError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class Dataset:
    """An n x m observation matrix with column names."""

    values: np.ndarray
    attribute_names: Sequence[str]
    object_ids: Sequence[str] = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise ConfigurationError(f"dataset must be a non-empty 2-d array, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("dataset contains non-finite entries")
        n, m = self.values.shape
        self.attribute_names = list(self.attribute_names)
        if len(self.attribute_names) != m:
            raise ConfigurationError(f"{len(self.attribute_names)} attribute names for {m} columns")
        if self.object_ids is None:
            self.object_ids = [str(j) for j in range(n)]
        self.object_ids = list(self.object_ids)
        if len(self.object_ids) != n:
            raise ConfigurationError(f"{len(self.object_ids)} object ids for {n} rows")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.values[rows], self.attribute_names, [self.object_ids[j] for j in rows])


@dataclass
class FaParams:
    mu: np.ndarray
    log_var: np.ndarray
    loadings: np.ndarray

    def copy(self) -> "FaParams":
        return FaParams(self.mu.copy(), self.log_var.copy(), self.loadings.copy())


def _values(data):
    return data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)


def build_covariance(loadings, log_var) -> np.ndarray:
    W = np.asarray(loadings, dtype=float)
    return W @ W.T + np.diag(np.exp(log_var))


def _factor(loadings, log_var):
    cov = build_covariance(loadings, log_var)
    if not np.all(np.isfinite(cov)):
        raise NumericalError("non-finite covariance")
    try:
        return linalg.cho_factor(cov, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"covariance factorization failed: {exc}") from exc


def fa_marginal_nll(data, params: FaParams) -> float:
    """Average negative log marginal likelihood per observation."""
    Y = _values(data)
    if Y.shape[1] != len(params.mu):
        raise ConfigurationError(f"data has {Y.shape[1]} columns, model has {len(params.mu)}")
    n, m = Y.shape
    (L, lower) = _factor(params.loadings, params.log_var)
    Z = linalg.solve_triangular(L, (Y - params.mu).T, lower=True, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return 0.5 * (m * LOG_2PI + logdet + np.sum(Z * Z) / n)


def fa_marginal_nll_grad(data, params: FaParams):
    """Gradient of :func:`fa_marginal_nll`.

    Returns ``(grad_mu, grad_loadings, grad_log_var)``.
    """
    Y = _values(data)
    if Y.shape[1] != len(params.mu):
        raise ConfigurationError(f"data has {Y.shape[1]} columns, model has {len(params.mu)}")
    n, m = Y.shape
    cf = _factor(params.loadings, params.log_var)
    D = Y - params.mu
    P = linalg.cho_solve(cf, np.eye(m), check_finite=False)
    PD = linalg.cho_solve(cf, D.T, check_finite=False)  # m x n
    # dNLL/dSigma = 0.5 (P - P S P), S = D^T D / n
    G = 0.5 * (P - PD @ PD.T / n)
    G = 0.5 * (G + G.T)
    grad_mu = -PD.mean(axis=1)
    grad_W = 2.0 * G @ params.loadings
    grad_lv = np.diag(G) * np.exp(params.log_var)
    return grad_mu, grad_W, grad_lv
