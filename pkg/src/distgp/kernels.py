"""Positive-definite covariance functions.

Three prior families are supported, each parametrized by a time-rescaling
factor ``tau`` so that the kernel with scale ``tau`` evaluated at ``(s, t)``
equals the unit-scale kernel evaluated at ``(tau*s, tau*t)``:

* squared exponential,  k(s, t) = exp(-tau^2 |s - t|^2 / 2)
* Matern with half-integer regularity, via the usual closed forms in
  u = sqrt(2 alpha) * tau * r
* released integer-fold integrated Brownian motion, which is non-stationary
  and defined on the non-negative half line only.

All kernels carry a multiplicative ``signal_var``.  Gram matrices headed
for a Cholesky factorization receive ``JITTER * signal_var`` on the
diagonal (see :func:`gram_jitter`).
"""

from dataclasses import dataclass
from enum import Enum
from math import comb, factorial

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DomainError, UnsupportedParameterError

# Relative diagonal jitter applied before factorizations; far below the
# noise floor of every experiment.
JITTER = 1e-10

# Matern regularities with an implemented closed form.
MATERN_CLOSED_FORMS = (0.5, 1.5, 2.5, 3.5)


class Family(Enum):
    MATERN = "matern"
    SQUARED_EXPONENTIAL = "se"
    INTEGRATED_BM = "ibm"


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family plus the hyperparameters that pin the prior.

    Parameters
    ----------
    family : Family
        Covariance family.
    regularity : float
        Matern smoothness alpha (half-integer), or the integer fold
        count of the integrated Brownian motion.  Ignored by the squared
        exponential.
    scale : float
        Time-rescaling parameter tau (units 1/length).
    poly_scale : float
        Amplitude of the polynomial release term of integrated Brownian
        motion; ignored by the stationary families.
    signal_var : float
        Multiplicative output variance.
    """

    family: Family
    regularity: float = 1.5
    scale: float = 1.0
    poly_scale: float = 1.0
    signal_var: float = 1.0

    def __post_init__(self):
        if not (self.regularity > 0 or self.family is Family.INTEGRATED_BM):
            raise UnsupportedParameterError("regularity must be positive")
        if self.scale <= 0:
            raise UnsupportedParameterError("scale must be positive")
        if self.signal_var <= 0:
            raise UnsupportedParameterError("signal_var must be positive")
        if self.family is Family.INTEGRATED_BM:
            if self.regularity < 0 or self.regularity != int(self.regularity):
                raise UnsupportedParameterError(
                    "integrated BM fold count must be a non-negative integer, "
                    f"got {self.regularity}"
                )
            if self.poly_scale <= 0:
                raise UnsupportedParameterError("poly_scale must be positive")


def as_points(x):
    """Coerce scalars, vectors or point lists to a (n, d) float array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return a.reshape(1, 1)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    if a.ndim == 2:
        return a
    raise DomainError(f"points must be at most 2-dimensional, got shape {a.shape}")


def _matern_shape(u, alpha):
    """Unit-variance half-integer Matern profile in u = sqrt(2 alpha) tau r."""
    e = np.exp(-u)
    if alpha == 0.5:
        return e
    if alpha == 1.5:
        return (1.0 + u) * e
    if alpha == 2.5:
        return (1.0 + u + u**2 / 3.0) * e
    if alpha == 3.5:
        return (1.0 + u + 0.4 * u**2 + u**3 / 15.0) * e
    raise UnsupportedParameterError(
        f"Matern regularity {alpha} has no implemented closed form; "
        f"supported values: {MATERN_CLOSED_FORMS}"
    )


def _ibm_gram(a, b, ell, poly_amp2):
    """Covariance of released ell-fold integrated BM at rescaled times.

    ``a`` and ``b`` are 1-d arrays of non-negative rescaled times.  The
    polynomial release term contributes poly_amp2 * sum_j (a b)^j / (j!)^2;
    the integrated-BM term is the exact binomial expansion of
    int_0^{min(a,b)} (a-u)^ell (b-u)^ell du / (ell!)^2.
    """
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("integrated BM covariance requires non-negative times")
    av = a[:, None]
    bv = b[None, :]
    out = np.zeros((a.size, b.size))
    for j in range(ell + 1):
        out += poly_amp2 * (av**j) * (bv**j) / factorial(j) ** 2
    m0 = np.minimum(av, bv)
    norm = factorial(ell) ** 2
    for i in range(ell + 1):
        for j in range(ell + 1):
            coef = comb(ell, i) * comb(ell, j) * (-1.0) ** (i + j) / (i + j + 1)
            out += coef * (av ** (ell - i)) * (bv ** (ell - j)) * m0 ** (i + j + 1) / norm
    return out


def gram_matrix(cfg, xs, ys):
    """Cross-covariance matrix with entry (i, j) = k(xs[i], ys[j])."""
    xs = as_points(xs)
    ys = as_points(ys)
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DomainError("kernel inputs must be finite")
    if cfg.family is Family.SQUARED_EXPONENTIAL:
        d2 = cdist(cfg.scale * xs, cfg.scale * ys, "sqeuclidean")
        return cfg.signal_var * np.exp(-0.5 * d2)
    if cfg.family is Family.MATERN:
        alpha = cfg.regularity
        if alpha not in MATERN_CLOSED_FORMS:
            raise UnsupportedParameterError(
                f"Matern regularity {alpha} has no implemented closed form; "
                f"supported values: {MATERN_CLOSED_FORMS}"
            )
        r = cdist(cfg.scale * xs, cfg.scale * ys, "euclidean")
        return cfg.signal_var * _matern_shape(np.sqrt(2.0 * alpha) * r, alpha)
    if cfg.family is Family.INTEGRATED_BM:
        if xs.shape[1] != 1 or ys.shape[1] != 1:
            raise UnsupportedParameterError(
                "integrated BM covariance is defined for 1-d inputs only"
            )
        ell = int(cfg.regularity)
        out = _ibm_gram(
            cfg.scale * xs[:, 0], cfg.scale * ys[:, 0], ell, cfg.poly_scale**2
        )
        return cfg.signal_var * out
    raise UnsupportedParameterError(f"unknown kernel family {cfg.family!r}")


def eval_kernel(cfg, s, t):
    """Evaluate the covariance function at a single pair of points."""
    return float(gram_matrix(cfg, [s], [t])[0, 0])


def gram_jitter(cfg, n):
    """Diagonal jitter matrix used before Cholesky factorizations."""
    return JITTER * cfg.signal_var * np.eye(n)
