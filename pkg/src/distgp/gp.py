"""Exact Gaussian-process regression on a single shard.

The posterior mean, pointwise variance, joint draws on a grid, and the log
marginal likelihood are all computed from one Cholesky factorization of
K + sigma^2 I (plus diagonal jitter).  A shard with zero observations is
valid and yields the prior itself, which keeps the aggregation formulas
total when a spatial cell happens to be empty.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import NumericalDegeneracyError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class Dataset:
    """Covariate/response pairs; the unit of sharding.

    ``xs`` has shape (n, d), ``ys`` shape (n,).  ``meta`` is a free-form
    provenance tag ("synthetic", "flights:train", shard labels, ...).
    """

    xs: np.ndarray
    ys: np.ndarray
    meta: str = ""

    def __post_init__(self):
        self.xs = kernels.as_points(self.xs) if np.size(self.xs) else np.empty((0, 1))
        self.ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if self.xs.shape[0] != self.ys.shape[0]:
            raise ValueError(
                f"xs has {self.xs.shape[0]} rows but ys has {self.ys.shape[0]}"
            )
        if self.xs.size and not (
            np.all(np.isfinite(self.xs)) and np.all(np.isfinite(self.ys))
        ):
            raise ValueError("dataset entries must be finite")

    def __len__(self):
        return self.xs.shape[0]

    def subset(self, idx, meta=None):
        return Dataset(self.xs[idx], self.ys[idx], self.meta if meta is None else meta)


@dataclass
class LocalPosterior:
    """Fitted GP summary for one shard.

    Stores the lower Cholesky factor of K + sigma^2 I (jittered) and the
    solved vector alpha = (K + sigma^2 I)^{-1} y, which together answer
    mean/variance/draw queries at any point.  Immutable after fit.
    """

    cfg: kernels.KernelConfig
    noise_var: float
    train: Dataset
    chol: np.ndarray
    alpha: np.ndarray
    region: object = None
    fit_seconds: float = 0.0

    def predict(self, query):
        return predict(self, query)

    def draw(self, query, rng):
        return draw(self, query, rng)

    def prior_var(self, query):
        q = kernels.as_points(query)
        return np.array([kernels.eval_kernel(self.cfg, p, p) for p in q])


def fit(cfg, noise_var, shard, region=None):
    """Condition the prior ``cfg`` on ``shard`` with noise variance sigma^2."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    t0 = time.perf_counter()
    n = len(shard)
    if n == 0:
        return LocalPosterior(
            cfg, noise_var, shard, np.empty((0, 0)), np.empty(0), region,
            time.perf_counter() - t0,
        )
    ky = gram_with_noise(cfg, shard.xs, noise_var)
    try:
        chol = np.linalg.cholesky(ky)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(
            f"Cholesky failed on shard {shard.meta or '<unnamed>'} (n={n})"
        ) from exc
    alpha = solve_triangular(
        chol.T, solve_triangular(chol, shard.ys, lower=True), lower=False
    )
    return LocalPosterior(
        cfg, noise_var, shard, chol, alpha, region, time.perf_counter() - t0
    )


def gram_with_noise(cfg, xs, noise_var):
    """K + sigma^2 I with the standard diagonal jitter."""
    n = kernels.as_points(xs).shape[0]
    return (
        kernels.gram_matrix(cfg, xs, xs)
        + noise_var * np.eye(n)
        + kernels.gram_jitter(cfg, n)
    )


def predict(post, query):
    """Posterior mean and pointwise variance of f at the query points."""
    q = kernels.as_points(query)
    prior_diag = np.diag(kernels.gram_matrix(post.cfg, q, q)).copy()
    if len(post.train) == 0:
        return np.zeros(q.shape[0]), prior_diag
    kxq = kernels.gram_matrix(post.cfg, post.train.xs, q)
    mean = kxq.T @ post.alpha
    v = solve_triangular(post.chol, kxq, lower=True)
    var = prior_diag - np.einsum("ij,ij->j", v, v)
    # floating-point cancellation can push the variance marginally negative
    return mean, np.maximum(var, 0.0)


def predictive_cov(post, query):
    """Posterior mean vector and full covariance matrix on the query grid."""
    q = kernels.as_points(query)
    kqq = kernels.gram_matrix(post.cfg, q, q)
    if len(post.train) == 0:
        return np.zeros(q.shape[0]), kqq
    kxq = kernels.gram_matrix(post.cfg, post.train.xs, q)
    mean = kxq.T @ post.alpha
    v = solve_triangular(post.chol, kxq, lower=True)
    return mean, kqq - v.T @ v


def sample_mvn(mean, cov, rng, jitter=0.0):
    """One draw from N(mean, cov); an all-zero covariance returns the mean."""
    d = np.maximum(np.diag(cov), 0.0)
    if not d.any():
        return mean.copy()
    try:
        chol = np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(
            "grid covariance is not factorizable even after jitter"
        ) from exc
    return mean + chol @ rng.standard_normal(mean.shape[0])


def draw(post, query, rng):
    """Sample function values on ``query`` from the joint posterior."""
    q = kernels.as_points(query)
    if q.shape[0] > 10_000:
        raise ValueError("draw grids are limited to 10000 points")
    mean, cov = predictive_cov(post, q)
    return sample_mvn(mean, cov, rng, jitter=kernels.JITTER * post.cfg.signal_var)


def log_marginal_likelihood(cfg, noise_var, shard):
    """Gaussian evidence of the shard under the prior ``cfg`` and noise."""
    n = len(shard)
    if n == 0:
        return 0.0
    ky = gram_with_noise(cfg, shard.xs, noise_var)
    try:
        chol = np.linalg.cholesky(ky)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(
            f"Cholesky failed on shard {shard.meta or '<unnamed>'} (n={n})"
        ) from exc
    alpha = solve_triangular(
        chol.T, solve_triangular(chol, shard.ys, lower=True), lower=False
    )
    return float(
        -0.5 * shard.ys @ alpha
        - np.sum(np.log(np.diag(chol)))
        - 0.5 * n * LOG_2PI
    )
