"""Synthetic truth and data generation, plus airline-delay ingestion.

The synthetic regression truth is the cosine-basis series with
coefficients c * i^(-1/2-beta) * sin(i) for i >= 4 (and zero below),
relative to psi_i(t) = sqrt(2) cos(pi (i - 1/2) t).  The series is
truncated at the first index where the absolute-tail bound
sqrt(2) c * sum_{i>N} i^(-1/2-beta) drops below ``tail_tol``; because
that bound can demand astronomically many terms for rough truths
(beta near 1/2), the cutoff is capped at ``SERIES_CAP`` terms, where the
oscillation of sin(i) has long since pushed the realized truncation
error orders of magnitude below every experiment's noise floor.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError
from .gp import Dataset

SERIES_CAP = 65536

FEATURE_SLOTS = (
    "aircraft_age",
    "distance",
    "airtime",
    "departure_time",
    "arrival_time",
    "month",
    "day_of_week",
    "day_of_month",
)
TARGET_SLOT = "arrival_delay"


@dataclass(frozen=True)
class TrueFunction:
    """Cosine-series regression truth of essential smoothness beta."""

    c: float = 1.5
    beta: float = 1.0
    n_max: int = None
    tail_tol: float = 1e-8

    def resolved_n_max(self):
        if self.n_max is not None:
            return self.n_max
        if self.beta <= 0.5:
            return SERIES_CAP
        # sqrt(2) c N^(1/2-beta) / (beta-1/2) < tail_tol
        grow = np.sqrt(2.0) * self.c / ((self.beta - 0.5) * self.tail_tol)
        n = int(np.ceil(grow ** (1.0 / (self.beta - 0.5))))
        return min(max(n, 4), SERIES_CAP)


def eval_true_function(tf, x):
    """Evaluate the truth at x in [0, 1] (scalar or array)."""
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if xs.size and (xs.min() < 0.0 or xs.max() > 1.0):
        raise DomainError("the synthetic truth is defined on [0,1]")
    n_max = tf.resolved_n_max()
    out = np.zeros(xs.shape)
    if tf.c != 0.0 and n_max >= 4:
        chunk = max(1, (1 << 22) // max(xs.size, 1))
        for lo in range(4, n_max + 1, chunk):
            i = np.arange(lo, min(lo + chunk, n_max + 1), dtype=float)
            coef = tf.c * i ** (-0.5 - tf.beta) * np.sin(i)
            out += np.sqrt(2.0) * np.cos(np.pi * np.outer(xs, i - 0.5)) @ coef
    return float(out[0]) if scalar else out


def generate_synthetic(tf, n, sigma, rng):
    """n i.i.d. pairs with U(0,1) design and N(0, sigma^2) noise."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    xs = rng.uniform(0.0, 1.0, size=n)
    ys = eval_true_function(tf, xs) + sigma * rng.standard_normal(n)
    return Dataset(xs, ys, meta="synthetic")


def dump_dataset(data, path):
    """Write a 1-d dataset as x,y CSV at full decimal precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in zip(data.xs[:, 0], data.ys):
            writer.writerow([f"{x:.17g}", f"{y:.17g}"])


def load_dataset(path, meta="loaded"):
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
    return Dataset(np.array(xs), np.array(ys), meta=meta)


def read_schema(path):
    """Flat key=value file mapping feature slots to CSV column names."""
    mapping = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            mapping[key.strip()] = value.strip()
    return mapping


@dataclass
class FlightIngest:
    """Result of :func:`ingest_flights`; train/test plus parse accounting."""

    train: Dataset
    test: Dataset
    rows_parsed: int
    rows_dropped: int
    feature_means: np.ndarray
    feature_sds: np.ndarray


def ingest_flights(path, train_size, test_size, rng, schema=None):
    """Parse the airline CSV into standardized train/test datasets.

    Rows with missing or non-numeric fields are dropped (and counted).
    Features are standardized to zero mean and unit variance using
    train-set statistics; the split is random, disjoint by construction
    and deterministic given the rng.
    """
    schema = schema or {slot: slot for slot in FEATURE_SLOTS + (TARGET_SLOT,)}
    columns = [schema.get(slot, slot) for slot in FEATURE_SLOTS]
    target_col = schema.get(TARGET_SLOT, TARGET_SLOT)
    feats, targets, dropped = [], [], 0
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                feats.append([float(row[c]) for c in columns])
                targets.append(float(row[target_col]))
            except (KeyError, TypeError, ValueError):
                dropped += 1
    parsed = len(feats)
    if parsed < train_size + test_size:
        raise InsufficientDataError(
            f"{path}: parsed {parsed} usable rows "
            f"({dropped} dropped), need {train_size + test_size}"
        )
    feats = np.asarray(feats)
    targets = np.asarray(targets)
    perm = rng.permutation(parsed)
    tr = perm[:train_size]
    te = perm[train_size : train_size + test_size]
    mu = feats[tr].mean(axis=0)
    sd = feats[tr].std(axis=0)
    sd[sd == 0.0] = 1.0
    train = Dataset((feats[tr] - mu) / sd, targets[tr], meta="flights:train")
    test = Dataset((feats[te] - mu) / sd, targets[te], meta="flights:test")
    return FlightIngest(train, test, parsed, dropped, mu, sd)
