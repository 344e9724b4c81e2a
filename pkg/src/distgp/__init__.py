"""Distributed Gaussian-process regression with local-posterior aggregation.

The package splits a regression dataset over m machines (spatially or at
random), fits an exact GP posterior on each shard, and recombines the
local posteriors under consensus averaging, glueing, inverse-variance or
exponential-distance weights.  A benchmark harness reproduces synthetic
and airline-delay experiments (L2 error, credible-ball coverage,
runtime) from the command line.
"""

from .aggregate import (
    CONSENSUS,
    EXP_WEIGHT,
    GLUE,
    INV_VAR,
    AggregatedPosterior,
    agg_draw,
    agg_mean_var,
    consensus_prepare,
    weights_at,
)
from .data import (
    TrueFunction,
    eval_true_function,
    generate_synthetic,
    ingest_flights,
)
from .gp import (
    Dataset,
    LocalPosterior,
    draw,
    fit,
    log_marginal_likelihood,
    predict,
)
from .harness import ExperimentConfig, resolve_config, run_experiment, run_flight
from .kernels import Family, KernelConfig, eval_kernel, gram_matrix
from .metrics import covered, credible_radius, l2_error, rmse, uniform_grid
from .partition import (
    Partition,
    partition_random,
    partition_spatial_1d,
    partition_spatial_kd,
)
from .scaling import (
    HyperPrior,
    MixturePosterior,
    ScaleRule,
    hierarchical_fit,
    hyperprior_density,
    hyperprior_sample,
    mmle_fit,
    optimal_scale,
)

__version__ = "0.1.0"
