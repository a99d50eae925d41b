"""Monte Carlo error bars from logarithmic binning."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

MIN_SERIES = 8
MIN_BINS = 64


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    stderr: float
    tau_int: float
    samples: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "tau_int": self.tau_int, "samples": self.samples}


def binning_curve(series) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``tau(b) = b var(bin means) / (2 var(x))`` for bin sizes ``b = 1, 2, 4, ...``.

    Returns bin sizes, tau estimates and their statistical errors; only
    levels with at least ``MIN_BINS`` bins are kept.
    """
    x = np.asarray(series, dtype=float)
    var1 = x.var(ddof=1)
    sizes, taus, errs = [], [], []
    b = 1
    while len(x) // b >= MIN_BINS:
        nb = len(x) // b
        means = x[:nb * b].reshape(nb, b).mean(axis=1)
        tau = 0.5 * b * means.var(ddof=1) / var1
        sizes.append(b)
        taus.append(tau)
        errs.append(tau * np.sqrt(2.0 / (nb - 1)))
        b *= 2
    return np.array(sizes), np.array(taus), np.array(errs)


def binned_stats(series) -> EstimatorResult:
    """Mean and autocorrelation-aware standard error of a time series.

    ``tau_int`` is read off the plateau of the binning curve: the first level
    whose next two levels no longer rise significantly above it.  An iid
    series has ``tau_int = 1/2`` and ``stderr = sqrt(2 tau var / n)``.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < MIN_SERIES:
        raise InsufficientDataError(f"need at least {MIN_SERIES} samples, got {n}")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    if var <= 0.0 or not np.isfinite(var):
        return EstimatorResult(mean, 0.0, 0.5, n)
    _, taus, errs = binning_curve(x)
    tau = _plateau(taus, errs) if len(taus) else 0.5
    tau = max(tau, 0.5)
    return EstimatorResult(mean, float(np.sqrt(2.0 * tau * var / n)), float(tau), n)


def _plateau(taus, errs) -> float:
    for i in range(len(taus)):
        ahead = taus[i + 1:i + 3]
        if len(ahead) < 2:
            break
        if np.all(ahead - taus[i] < 2.0 * errs[i + 1:i + 3]):
            return float(taus[i + 1])
    # no plateau reached: take the most binned level available
    return float(taus[-1])


def merge_results(results: Iterable[EstimatorResult]) -> EstimatorResult:
    """Combine independent estimates of the same quantity (sample-weighted).

    The inputs are sorted first so the floating-point result does not depend
    on their order.
    """
    rs = sorted(results, key=lambda r: (r.samples, r.mean, r.stderr, r.tau_int))
    if not rs:
        raise InsufficientDataError("nothing to merge")
    n = sum(r.samples for r in rs)
    mean = sum(r.samples * r.mean for r in rs) / n
    stderr = np.sqrt(sum((r.samples * r.stderr) ** 2 for r in rs)) / n
    tau = sum(r.samples * r.tau_int for r in rs) / n
    return EstimatorResult(float(mean), float(stderr), float(tau), int(n))
