"""Length-scale selection: minimax rules, empirical Bayes, hyperpriors.

Three routes to the time-rescaling parameter tau of a local prior:

* ``optimal_scale`` -- the deterministic power of n that compensates a
  known smoothness mismatch between the prior and the truth,
* ``mmle_fit`` -- derivative-free maximization of the Gaussian evidence
  over (log tau, log signal sd, log noise sd), with the log noise sd
  floored at -3 and at most ``max_iters`` objective improvements,
* ``hierarchical_fit`` -- grid marginalization of tau under a hyperprior
  density proportional to exp(-D n^e tau^p / m), whose normalizer is
  available in closed form.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from . import gp
from .errors import (
    DomainError,
    OptimizationFailureError,
    UnsupportedParameterError,
)
from .kernels import Family

MODE_FIXED = "fixed"
MODE_MMLE = "mmle"
MODE_HIER = "hier"


@dataclass(frozen=True)
class ScaleRule:
    """How a local problem chooses its length scale (and noise)."""

    mode: str = MODE_MMLE
    beta: float = None
    max_iters: int = 100
    max_evals: int = 500
    log_noise_sd_floor: float = -3.0
    grid_size: int = 32
    grid_span: tuple = (1e-2, 1e2)

    def __post_init__(self):
        if self.mode not in (MODE_FIXED, MODE_MMLE, MODE_HIER):
            raise UnsupportedParameterError(f"unknown scale mode {self.mode!r}")
        if (self.mode == MODE_FIXED) != (self.beta is not None):
            raise UnsupportedParameterError(
                "beta is required exactly when mode is 'fixed'"
            )


def optimal_scale(family, regularity, beta, n):
    """Minimax-optimal tau_n for a beta-smooth truth and n observations."""
    if beta <= 0:
        raise UnsupportedParameterError("beta must be positive")
    if n < 1:
        raise UnsupportedParameterError("n must be at least 1")
    if family is Family.SQUARED_EXPONENTIAL:
        return float(n) ** (1.0 / (1.0 + 2.0 * beta))
    if beta > regularity:
        raise UnsupportedParameterError(
            f"beta={beta} exceeds the prior regularity {regularity}"
        )
    if family is Family.MATERN:
        return float(n) ** ((regularity - beta) / (regularity * (1.0 + 2.0 * beta)))
    if family is Family.INTEGRATED_BM:
        half = regularity + 0.5
        return float(n) ** ((half - beta) / (half * (2.0 * beta + 1.0)))
    raise UnsupportedParameterError(f"unknown kernel family {family!r}")


class _Budget(Exception):
    pass


def mmle_fit(cfg_template, shard, rule=ScaleRule(), rng=None):
    """Empirical-Bayes (MMLE) selection of scale, signal and noise.

    Runs a Nelder-Mead search on (log tau, log signal sd, log noise sd)
    from (0, 0, 0), i.e. all hyperparameters starting at 1.  The log
    noise sd is clipped at the configured floor inside the objective so
    the search space stays unconstrained.  The search halts after
    ``rule.max_iters`` improvements of the best evidence seen, mirroring
    a bounded-iteration toolbox optimizer; the returned parameters are
    the best point seen, never worse than the starting point.  ``rng``
    is accepted for interface symmetry; the search is deterministic.
    """
    if rule.mode != MODE_MMLE:
        raise UnsupportedParameterError("mmle_fit requires a rule in 'mmle' mode")
    floor = rule.log_noise_sd_floor
    state = {"best": np.inf, "z": None, "improvements": 0, "finite_seen": False}

    def objective(z):
        log_tau, log_sf, log_sn = z[0], z[1], max(z[2], floor)
        try:
            cfg = replace(
                cfg_template,
                scale=math.exp(log_tau),
                signal_var=math.exp(2.0 * log_sf),
            )
            val = -gp.log_marginal_likelihood(cfg, math.exp(2.0 * log_sn), shard)
        except (ArithmeticError, OverflowError):
            val = np.inf
        if not np.isfinite(val):
            return np.inf
        state["finite_seen"] = True
        if val < state["best"]:
            state["best"] = val
            state["z"] = np.array([log_tau, log_sf, log_sn])
            state["improvements"] += 1
            if state["improvements"] > rule.max_iters:
                raise _Budget
        return val

    start = np.zeros(3)
    # scipy's default simplex barely perturbs zero coordinates, which
    # stalls the search at the starting point; spread the vertices one
    # log-unit per axis instead
    simplex = np.vstack([start, start + np.eye(3)])
    try:
        minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={
                "maxfev": rule.max_evals,
                "xatol": 1e-3,
                "fatol": 1e-3,
                "initial_simplex": simplex,
            },
        )
    except _Budget:
        pass
    if not state["finite_seen"]:
        raise OptimizationFailureError(
            f"no finite evidence value found on shard {shard.meta or '<unnamed>'}"
        )
    log_tau, log_sf, log_sn = state["z"]
    cfg = replace(
        cfg_template, scale=math.exp(log_tau), signal_var=math.exp(2.0 * log_sf)
    )
    return cfg, math.exp(2.0 * log_sn)


@dataclass(frozen=True)
class HyperPrior:
    """Scale hyperprior with density N * exp(-D n^e tau^p / m).

    The exponents follow the prior family: p = (ell+1/2)/(ell+1) and
    e = 1/(2 ell + 2) for integrated Brownian motion with fold count
    ell, p = alpha/(alpha+1/2) and e = 1/(2 alpha + 1) for the Matern
    process with regularity alpha.  N is the exact normalizer
    p * lambda^(1/p) / Gamma(1/p) with lambda = D n^e / m.
    """

    family: str
    ell_or_alpha: float
    n: int
    m: int
    rate_const: float = 1.0

    @property
    def power(self):
        a = self.ell_or_alpha
        if self.family == "ibm":
            return (a + 0.5) / (a + 1.0)
        if self.family == "matern":
            return a / (a + 0.5)
        raise UnsupportedParameterError(f"unknown hyperprior family {self.family!r}")

    @property
    def rate(self):
        a = self.ell_or_alpha
        if self.family == "ibm":
            e = 1.0 / (2.0 * a + 2.0)
        elif self.family == "matern":
            e = 1.0 / (2.0 * a + 1.0)
        else:
            raise UnsupportedParameterError(
                f"unknown hyperprior family {self.family!r}"
            )
        return self.rate_const * float(self.n) ** e / self.m


def hyperprior_density(hp, tau):
    """Normalized Lebesgue density of the scale hyperprior at tau > 0."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("the hyperprior lives on tau > 0")
    p, lam = hp.power, hp.rate
    norm = p * lam ** (1.0 / p) / math.gamma(1.0 / p)
    out = norm * np.exp(-lam * tau**p)
    return float(out) if out.ndim == 0 else out


def hyperprior_sample(hp, rng, size=None):
    """Exact sampling via tau = G^(1/p) with G ~ Gamma(1/p, rate lambda)."""
    p, lam = hp.power, hp.rate
    g = rng.gamma(1.0 / p, 1.0 / lam, size=size)
    return g ** (1.0 / p)


def log_spaced_grid(tau_hat, size=32, span=(1e-2, 1e2)):
    """Log-spaced tau grid bracketing a pilot estimate."""
    return np.geomspace(span[0] * tau_hat, span[1] * tau_hat, size)


@dataclass
class MixturePosterior:
    """Finite mixture over tau of exact local posteriors.

    Answers the same queries as a LocalPosterior: the predictive mean is
    the weight-averaged component mean, the predictive variance follows
    the law of total variance, and a draw first samples a component by
    weight and then draws from it.
    """

    components: list
    weights: np.ndarray
    taus: np.ndarray
    region: object = None
    fit_seconds: float = 0.0

    def predict(self, query):
        means = []
        varis = []
        for comp in self.components:
            mu, var = comp.predict(query)
            means.append(mu)
            varis.append(var)
        means = np.asarray(means)
        varis = np.asarray(varis)
        w = self.weights[:, None]
        mean = (w * means).sum(axis=0)
        second_moment = (w * (varis + means**2)).sum(axis=0)
        return mean, np.maximum(second_moment - mean**2, 0.0)

    def draw(self, query, rng):
        j = int(rng.choice(len(self.components), p=self.weights))
        return self.components[j].draw(query, rng)

    def prior_var(self, query):
        w = self.weights[:, None]
        pv = np.asarray([c.prior_var(query) for c in self.components])
        return (w * pv).sum(axis=0)


def _grid_cell_widths(taus):
    if taus.size == 1:
        return np.ones(1)
    mids = 0.5 * (taus[1:] + taus[:-1])
    edges = np.concatenate(([taus[0]], mids, [taus[-1]]))
    return np.maximum(np.diff(edges), 1e-300)


def hierarchical_fit(cfg_template, noise_var, shard, hp, taus, rng=None, region=None):
    """Grid-marginalized hierarchical posterior over the scale tau.

    Grid weights are proportional to evidence(tau_j) * density(tau_j) *
    cell_width_j; log-weights are re-centered before exponentiation so
    underflow can never zero out every cell.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.size > 64:
        raise UnsupportedParameterError("tau grids are limited to 64 points")
    components = []
    log_w = np.empty(taus.size)
    dens = hyperprior_density(hp, taus)
    widths = _grid_cell_widths(taus)
    for j, tau in enumerate(taus):
        cfg = replace(cfg_template, scale=float(tau))
        components.append(gp.fit(cfg, noise_var, shard, region=region))
        log_w[j] = (
            gp.log_marginal_likelihood(cfg, noise_var, shard)
            + np.log(dens[j])
            + np.log(widths[j])
        )
    log_w -= log_w.max()
    w = np.exp(log_w)
    w /= w.sum()
    return MixturePosterior(components, w, taus, region=region)
