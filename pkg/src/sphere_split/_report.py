"""EstimateReport and the standard-error helpers shared by the estimators."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy import stats

Z95 = 1.959963984540054
DEFAULT_THRESHOLD = 4.0


def gate_threshold(n_gates: int, base: float = DEFAULT_THRESHOLD) -> float:
    """z threshold for one gate in a suite of ``n_gates``.

    Up to 20 gates each uses ``base``. Beyond that the per-gate level shrinks
    so the family-wise false-alarm rate stays at its 20-gate value.
    """
    if n_gates <= 20:
        return base
    alpha = 2.0 * stats.norm.sf(base) * 20.0 / n_gates
    return float(stats.norm.isf(alpha / 2.0))


@dataclass
class EstimateReport:
    name: str
    n_replicates: int
    point_estimate: float
    std_error: float
    ci95: tuple[float, float]
    analytic_reference: float | None = None
    z_score: float | None = None
    passed: bool | None = None
    seed: int | None = None
    wall_time: float = 0.0
    threshold: float = DEFAULT_THRESHOLD
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        d["ci95"] = list(self.ci95)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_jsonable, sort_keys=True)

    def summary(self) -> str:
        ref = "" if self.analytic_reference is None else f" ref={self.analytic_reference!r} z={self.z_score:+.3f}"
        return f"{self.name}: {self.point_estimate!r} +- {self.std_error!r} (n={self.n_replicates}){ref}"


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)!r}")


def make_report(
    name: str,
    n: int,
    estimate: float,
    se: float,
    reference: float | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    seed: int | None = None,
    wall_time: float = 0.0,
    **details,
) -> EstimateReport:
    estimate = float(estimate)
    se = float(se)
    z = passed = None
    if reference is not None:
        reference = float(reference)
        diff = estimate - reference
        if se > 0:
            z = diff / se
        else:
            z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        passed = bool(abs(z) <= threshold)
    return EstimateReport(
        name=name,
        n_replicates=int(n),
        point_estimate=estimate,
        std_error=se,
        ci95=(estimate - Z95 * se, estimate + Z95 * se),
        analytic_reference=reference,
        z_score=z,
        passed=passed,
        seed=seed,
        wall_time=float(wall_time),
        threshold=threshold,
        details=dict(details),
    )


def compare_reports(name: str, a: EstimateReport, b: EstimateReport, threshold: float = DEFAULT_THRESHOLD) -> EstimateReport:
    """Two-sample z comparison of independent estimates a - b against 0."""
    se = math.hypot(a.std_error, b.std_error)
    return make_report(
        name,
        a.n_replicates + b.n_replicates,
        a.point_estimate - b.point_estimate,
        se,
        reference=0.0,
        threshold=threshold,
        left=a.point_estimate,
        right=b.point_estimate,
    )


# --- standard errors ---------------------------------------------------------------------


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    n = x.size
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf


def batch_means_se(x, n_batches: int | None = None) -> tuple[float, float]:
    """Mean and batch-means standard error (b = floor(sqrt(n)) batches by default)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    b = n_batches or max(2, int(math.isqrt(n)))
    size = n // b
    if size < 1:
        return mean_se(x)
    means = x[: b * size].reshape(b, size).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(b))


def variance_se(x) -> tuple[float, float]:
    """Unbiased sample variance and its fourth-moment standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = x - x.mean()
    s2 = float(c @ c / (n - 1))
    m4 = float(np.mean(c**4))
    var_s2 = (m4 - s2 * s2 * (n - 3) / (n - 1)) / n
    return s2, math.sqrt(max(var_s2, 0.0))


def covariance_se(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    p = (x - x.mean()) * (y - y.mean())
    cov = float(p.sum() / (n - 1))
    return cov, float(p.std(ddof=1) / math.sqrt(n))


def wilson_se(successes: int, n: int) -> tuple[float, float]:
    """Frequency and the Wilson-score half-width divided by 1.96."""
    p = successes / n
    z = Z95
    denom = 1.0 + z * z / n
    half = z / denom * math.sqrt(p * (1 - p) / n + z * z / (4.0 * n * n))
    return p, half / z


def ratio_se(num, den) -> tuple[float, float]:
    """Ratio of means sum(num)/sum(den) with a delta-method standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    r = float(num.sum() / den.sum())
    resid = num - r * den
    se = float(resid.std(ddof=1) / (math.sqrt(n) * den.mean()))
    return r, se
