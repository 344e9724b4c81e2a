"""Posterior evaluation: L2 error, credible radius, coverage, RMSE.

The L2 quantities are trapezoid-rule integrals over a uniform grid on
[0, 1]; 401 points keep the quadrature error far below the three
decimals at which results are reported.  The credible-ball radius is
twice the root average posterior variance, and the truth counts as
covered when its L2 distance to the posterior mean is strictly smaller
than that radius.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import TrueFunction, eval_true_function
from .errors import ContractViolationError

DETAIL_COLUMNS = ("method", "n", "m", "rep", "l2_error", "radius", "covered", "fit_seconds")
SUMMARY_COLUMNS = (
    "method", "n", "m", "l2_mean", "l2_sd", "radius_mean", "radius_sd",
    "coverage", "time_mean", "time_sd",
)


def uniform_grid(size=401):
    """Equispaced grid on [0, 1] including both endpoints."""
    if size < 2:
        raise ContractViolationError("grids need at least two points")
    return np.linspace(0.0, 1.0, size)


def l2_error(mean_on_grid, truth, grid):
    """Root trapezoid integral of (mean - f0)^2 over [0, 1].

    ``truth`` may be a TrueFunction or the precomputed truth values on
    the same grid.
    """
    f0 = eval_true_function(truth, grid) if isinstance(truth, TrueFunction) else truth
    diff = np.asarray(mean_on_grid) - np.asarray(f0)
    return float(np.sqrt(np.trapezoid(diff**2, grid)))


def credible_radius(vars_on_grid, grid):
    """Twice the root average posterior variance over [0, 1]."""
    v = np.asarray(vars_on_grid, dtype=float)
    if np.any(v < 0):
        raise ContractViolationError("posterior variances must be non-negative")
    return float(2.0 * np.sqrt(np.trapezoid(v, grid)))


def covered(l2_err, radius):
    """1 iff the truth lies strictly inside the credible ball."""
    if l2_err < 0 or radius < 0:
        raise ContractViolationError("arguments must be non-negative")
    return int(l2_err < radius)


def rmse(pred_means, targets):
    pred = np.asarray(pred_means, dtype=float)
    t = np.asarray(targets, dtype=float)
    if pred.shape != t.shape or pred.size == 0:
        raise ContractViolationError(
            f"prediction/target shapes differ or are empty: {pred.shape} vs {t.shape}"
        )
    return float(np.sqrt(np.mean((pred - t) ** 2)))


@dataclass
class ExperimentReport:
    """Per-replication metric rows plus recomputable summaries."""

    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def add_row(self, method, n, m, rep, l2, radius, cov, seconds):
        self.rows.append(
            {
                "method": method,
                "n": n,
                "m": m,
                "rep": rep,
                "l2_error": l2,
                "radius": radius,
                "covered": cov,
                "fit_seconds": seconds,
            }
        )

    def add_failure(self, method, rep, seed, error):
        self.failures.append(
            {"method": method, "rep": rep, "seed": seed, "error": repr(error)}
        )

    def methods(self):
        seen = []
        for row in self.rows:
            if row["method"] not in seen:
                seen.append(row["method"])
        return seen

    def column(self, method, name):
        return np.array([r[name] for r in self.rows if r["method"] == method])

    def summary(self):
        """One aggregate row per method, recomputed from the detail rows."""
        out = []
        for method in self.methods():
            l2 = self.column(method, "l2_error")
            rad = self.column(method, "radius")
            cov = self.column(method, "covered")
            sec = self.column(method, "fit_seconds")
            rows = [r for r in self.rows if r["method"] == method]
            out.append(
                {
                    "method": method,
                    "n": rows[0]["n"],
                    "m": rows[0]["m"],
                    "l2_mean": l2.mean(),
                    "l2_sd": _sd(l2),
                    "radius_mean": rad.mean(),
                    "radius_sd": _sd(rad),
                    "coverage": cov.mean(),
                    "time_mean": sec.mean(),
                    "time_sd": _sd(sec),
                }
            )
        return out

    def write_detail(self, path):
        _write_csv(path, DETAIL_COLUMNS, self.rows)

    def write_summary(self, path):
        _write_csv(path, SUMMARY_COLUMNS, self.summary())

    @property
    def failure_fraction(self):
        total = len(self.rows) + len(self.failures)
        return len(self.failures) / total if total else 0.0


def _sd(values):
    return float(values.std(ddof=1)) if values.size > 1 else 0.0


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.10g}"
    return value
