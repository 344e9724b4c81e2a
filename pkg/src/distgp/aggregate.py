"""Combine m local posteriors into one aggregated posterior.

Four rules are implemented, differing only in the pointwise weights
w_k(x) applied to the local posteriors:

* consensus averaging over a random split: w_k = 1/m, with the local
  priors inflated by m beforehand (see :func:`consensus_prepare`),
* glue: the indicator of the region owning x,
* inverse-variance: w_k proportional to 1 / sigma_k^2(x),
* exponential-distance: w_k proportional to
  exp(-rho m^2 |x - c_k|^2) / sigma_k^2(x), with c_k the center of
  gravity of region k.

Given the weights, the aggregated mean is sum_k w_k mu_k and the
aggregated variance is sum_k w_k^2 sigma_k^2, since draws from distinct
shards are independent and the weights are frozen at their plug-in
values.  A draw combines independent local draws with the same weights.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import UnsupportedParameterError
from .kernels import as_points
from .partition import RANDOM, SPATIAL_1D, SPATIAL_KD

CONSENSUS = "consensus"
GLUE = "glue"
INV_VAR = "invvar"
EXP_WEIGHT = "expweight"

# interpolation can drive a local variance to exact zero; clamp before
# inverting so weights stay finite
VAR_FLOOR = 1e-12


@dataclass
class AggregatedPosterior:
    """Ordered local posteriors plus an aggregation rule."""

    locals: list
    rule: str
    partition: object
    rho: float = 1.0

    def __post_init__(self):
        if self.rule not in (CONSENSUS, GLUE, INV_VAR, EXP_WEIGHT):
            raise UnsupportedParameterError(f"unknown aggregation rule {self.rule!r}")
        if len(self.locals) != self.partition.m:
            raise ValueError("one local posterior per shard is required")
        spatial = self.partition.kind in (SPATIAL_1D, SPATIAL_KD)
        if self.rule == CONSENSUS and spatial:
            raise UnsupportedParameterError(
                "consensus averaging requires a random partition"
            )
        if self.rule != CONSENSUS and not spatial:
            raise UnsupportedParameterError(
                f"rule {self.rule!r} requires a spatial partition"
            )
        if self.rule == EXP_WEIGHT and self.rho <= 0:
            raise UnsupportedParameterError("rho must be positive")

    @property
    def m(self):
        return self.partition.m

    def predict(self, query):
        return agg_mean_var(self, query)

    def draw(self, query, rng):
        return agg_draw(self, query, rng)


def consensus_prepare(cfg, m):
    """Inflate the prior covariance by m (prior density to the 1/m power)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return replace(cfg, signal_var=cfg.signal_var * m)


def _weight_matrix(agg, query, local_vars):
    """Pointwise weights, shape (m, n_query); rows of local_vars match locals."""
    q = as_points(query)
    nq = q.shape[0]
    m = agg.m
    if agg.rule == CONSENSUS:
        return np.full((m, nq), 1.0 / m)
    if agg.rule == GLUE:
        owner = agg.partition.region_of(q)
        w = np.zeros((m, nq))
        w[owner, np.arange(nq)] = 1.0
        return w
    sig2 = np.maximum(local_vars, VAR_FLOOR)
    if agg.rule == INV_VAR:
        w = 1.0 / sig2
        return w / w.sum(axis=0)
    # exponential-distance weights, computed in log space: with many
    # machines every unnormalized weight can underflow otherwise
    centers = agg.partition.centers
    d2 = ((q[None, :, :] - centers[:, None, :]) ** 2).sum(axis=2)
    log_w = -agg.rho * m**2 * d2 - np.log(sig2)
    log_w -= log_w.max(axis=0)
    w = np.exp(log_w)
    return w / w.sum(axis=0)


def _local_predictions(agg, query):
    means = np.empty((agg.m, as_points(query).shape[0]))
    varis = np.empty_like(means)
    for k, post in enumerate(agg.locals):
        means[k], varis[k] = post.predict(query)
    return means, varis


def weights_at(agg, x):
    """Aggregation weights of the m locals at a single point."""
    if agg.rule in (INV_VAR, EXP_WEIGHT):
        _, varis = _local_predictions(agg, [x])
    else:
        varis = None
    return _weight_matrix(agg, [x], varis)[:, 0]


def agg_mean_var(agg, query):
    """Aggregated mean and variance at the query points."""
    means, varis = _local_predictions(agg, query)
    w = _weight_matrix(agg, query, varis)
    mean = (w * means).sum(axis=0)
    var = (w**2 * varis).sum(axis=0)
    return mean, var


def agg_draw(agg, query, rng):
    """Combine independent local draws pointwise by the rule's weights."""
    q = as_points(query)
    draws = np.empty((agg.m, q.shape[0]))
    varis = np.empty_like(draws)
    for k, post in enumerate(agg.locals):
        draws[k] = post.draw(q, rng)
        _, varis[k] = post.predict(q)
    w = _weight_matrix(agg, q, varis)
    return (w * draws).sum(axis=0)
