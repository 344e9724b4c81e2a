"""Fast built-in invariant checks, runnable from the CLI.

Each check exercises one library contract end to end in well under a
second; together they catch the mistakes that silently corrupt
experiment output (asymmetric kernels, broken partitions, unnormalized
weights, non-reproducible seeding).
"""

import numpy as np
from scipy.integrate import quad

from . import aggregate, gp, kernels, metrics, partition, scaling
from .data import TrueFunction, generate_synthetic
from .kernels import Family, KernelConfig


def _configs():
    return [
        KernelConfig(Family.SQUARED_EXPONENTIAL, scale=2.0),
        KernelConfig(Family.MATERN, regularity=2.5, scale=3.0),
        KernelConfig(Family.INTEGRATED_BM, regularity=1, scale=1.5),
    ]


def check_kernel_symmetry():
    rng = np.random.default_rng(1)
    for cfg in _configs():
        for _ in range(50):
            s, t = rng.uniform(0, 1, 2)
            a = kernels.eval_kernel(cfg, s, t)
            b = kernels.eval_kernel(cfg, t, s)
            if abs(a - b) > 1e-12:
                return False, f"asymmetry {a} vs {b} for {cfg.family}"
    return True, ""


def check_gram_psd():
    rng = np.random.default_rng(2)
    for cfg in _configs():
        pts = rng.uniform(0, 1, 30)
        gram = kernels.gram_matrix(cfg, pts, pts)
        lo = np.linalg.eigvalsh(gram).min()
        if lo < -1e-8 * np.trace(gram):
            return False, f"min eigenvalue {lo} for {cfg.family}"
    return True, ""


def check_scale_semantics():
    rng = np.random.default_rng(3)
    for cfg in _configs()[:2]:
        unit = KernelConfig(cfg.family, cfg.regularity, 1.0)
        for _ in range(20):
            s, t = rng.uniform(0, 1, 2)
            a = kernels.eval_kernel(cfg, s, t)
            b = kernels.eval_kernel(unit, cfg.scale * s, cfg.scale * t)
            if abs(a - b) > 1e-12:
                return False, f"scale semantics broken for {cfg.family}"
    return True, ""


def check_posterior_shrinks():
    rng = np.random.default_rng(4)
    data = gp.Dataset(rng.uniform(0, 1, 12), rng.standard_normal(12))
    for cfg in _configs():
        post = gp.fit(cfg, 0.5, data)
        q = rng.uniform(0, 1, 15)
        _, var = post.predict(q)
        prior = post.prior_var(q)
        if np.any(var > prior + 1e-10):
            return False, f"posterior variance above prior for {cfg.family}"
    return True, ""


def check_dense_oracle():
    rng = np.random.default_rng(5)
    cfg = _configs()[0]
    data = gp.Dataset(rng.uniform(0, 1, 10), rng.standard_normal(10))
    post = gp.fit(cfg, 0.3, data)
    q = rng.uniform(0, 1, 5)
    mean, var = post.predict(q)
    ky = gp.gram_with_noise(cfg, data.xs, 0.3)
    kxq = kernels.gram_matrix(cfg, data.xs, q)
    inv = np.linalg.inv(ky)
    mean_o = kxq.T @ inv @ data.ys
    var_o = np.diag(kernels.gram_matrix(cfg, q, q) - kxq.T @ inv @ kxq)
    ok = np.allclose(mean, mean_o, atol=1e-8) and np.allclose(var, var_o, atol=1e-8)
    return ok, "" if ok else "dense-solve mismatch"


def check_weight_normalization():
    rng = np.random.default_rng(6)
    tf = TrueFunction()
    data = generate_synthetic(tf, 60, 1.0, rng)
    cfg = KernelConfig(Family.SQUARED_EXPONENTIAL, scale=5.0)
    part, shards = partition.partition_spatial_1d(data, 4)
    locals_ = [gp.fit(cfg, 1.0, s, region=part.regions[k]) for k, s in enumerate(shards)]
    rpart, rshards = partition.partition_random(data, 4, rng)
    rlocals = [gp.fit(cfg, 1.0, s) for s in rshards]
    aggs = [
        aggregate.AggregatedPosterior(locals_, rule, part)
        for rule in (aggregate.GLUE, aggregate.INV_VAR, aggregate.EXP_WEIGHT)
    ] + [aggregate.AggregatedPosterior(rlocals, aggregate.CONSENSUS, rpart)]
    for agg in aggs:
        for x in rng.uniform(0, 1, 25):
            w = aggregate.weights_at(agg, x)
            if abs(w.sum() - 1.0) > 1e-12 or np.any(w < 0):
                return False, f"weights off for rule {agg.rule}"
    return True, ""


def check_sharding_equivalence():
    rng = np.random.default_rng(7)
    data = generate_synthetic(TrueFunction(), 50, 1.0, rng)
    cfg = KernelConfig(Family.SQUARED_EXPONENTIAL, scale=5.0)
    full = gp.fit(cfg, 1.0, data)
    part, shards = partition.partition_spatial_1d(data, 1)
    agg = aggregate.AggregatedPosterior(
        [gp.fit(cfg, 1.0, shards[0], region=part.regions[0])], aggregate.GLUE, part
    )
    grid = metrics.uniform_grid(101)
    fm, fv = full.predict(grid)
    am, av = agg.predict(grid)
    ok = np.allclose(fm, am, atol=1e-8) and np.allclose(fv, av, atol=1e-8)
    return ok, "" if ok else "m=1 glue differs from full fit"


def check_hyperprior_normalized():
    hp = scaling.HyperPrior("matern", 2.5, 2000, 20)
    total, _ = quad(lambda t: scaling.hyperprior_density(hp, t), 0, np.inf)
    ok = abs(total - 1.0) < 1e-6
    return ok, "" if ok else f"density integrates to {total}"


def check_partition_exhaustive():
    rng = np.random.default_rng(8)
    data = generate_synthetic(TrueFunction(), 97, 1.0, rng)
    for builder in (
        lambda: partition.partition_spatial_1d(data, 7),
        lambda: partition.partition_random(data, 7, np.random.default_rng(0)),
        lambda: partition.partition_spatial_kd(data, 7, np.random.default_rng(0)),
    ):
        part, shards = builder()
        total = sum(len(s) for s in shards)
        if total != len(data):
            return False, f"{part.kind} loses points ({total} != {len(data)})"
    return True, ""


def check_seed_reproducibility():
    a = generate_synthetic(TrueFunction(), 40, 1.0, np.random.default_rng(99))
    b = generate_synthetic(TrueFunction(), 40, 1.0, np.random.default_rng(99))
    ok = np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)
    return ok, "" if ok else "generation is not seed-reproducible"


CHECKS = [
    ("kernel symmetry", check_kernel_symmetry),
    ("gram PSD", check_gram_psd),
    ("scale semantics", check_scale_semantics),
    ("posterior below prior variance", check_posterior_shrinks),
    ("dense-solve oracle", check_dense_oracle),
    ("aggregation weight normalization", check_weight_normalization),
    ("m=1 sharding equivalence", check_sharding_equivalence),
    ("hyperprior normalization", check_hyperprior_normalized),
    ("partitions exhaustive", check_partition_exhaustive),
    ("seeded generation reproducible", check_seed_reproducibility),
]


def run_selftest(out=print):
    """Run every check; returns the number of failures."""
    failures = 0
    for name, check in CHECKS:
        ok, detail = check()
        out(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
        failures += 0 if ok else 1
    return failures
