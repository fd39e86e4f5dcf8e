"""Estimate accumulation and least-squares slope fits for experiment output.

Chunk results are merged through exactly rounded sums (math.fsum), so the
merged estimate does not depend on the order chunks arrive in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sps


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    std_error: float
    samples: int

    def interval(self, confidence: float = 0.95) -> tuple[float, float]:
        """Student-t confidence interval for the mean."""
        if self.samples < 2:
            return (-math.inf, math.inf)
        half = _sps.t.ppf(0.5 + confidence / 2, self.samples - 1) * self.std_error
        return (self.mean - half, self.mean + half)

    def consistent_with(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.std_error


@dataclass
class ChunkAccumulator:
    """Order-insensitive accumulator of per-chunk first and second moments."""

    counts: list = field(default_factory=list)
    sums: list = field(default_factory=list)
    sqsums: list = field(default_factory=list)

    def add_chunk(self, values: np.ndarray) -> None:
        v = np.asarray(values, dtype=float).ravel()
        self.counts.append(v.size)
        self.sums.append(math.fsum(v.tolist()))
        self.sqsums.append(math.fsum((v * v).tolist()))

    def add_summary(self, count: int, total: float, sq_total: float) -> None:
        self.counts.append(count)
        self.sums.append(total)
        self.sqsums.append(sq_total)

    def estimate(self) -> EstimateWithError:
        n = sum(self.counts)
        if n == 0:
            return EstimateWithError(math.nan, math.inf, 0)
        s1 = math.fsum(self.sums)
        s2 = math.fsum(self.sqsums)
        mean = s1 / n
        if n < 2:
            return EstimateWithError(mean, math.inf, n)
        var = max(0.0, (s2 - n * mean * mean) / (n - 1))
        return EstimateWithError(mean, math.sqrt(var / n), n)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    slope_se: float
    ci_low: float
    ci_high: float
    points: int


def loglog_fit(xs, ys, weights=None, confidence: float = 0.95) -> SlopeFit:
    """Weighted least squares of log y against log x with a t interval."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    if lx.size < 3:
        raise ValueError("need at least three points to bound a slope")
    w = np.ones_like(lx) if weights is None else np.asarray(weights, dtype=float)
    sw = w.sum()
    mx = (w * lx).sum() / sw
    my = (w * ly).sum() / sw
    sxx = (w * (lx - mx) ** 2).sum()
    slope = (w * (lx - mx) * (ly - my)).sum() / sxx
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    dof = lx.size - 2
    s2 = (w * resid ** 2).sum() / dof
    se = math.sqrt(s2 / sxx)
    half = _sps.t.ppf(0.5 + confidence / 2, dof) * se
    return SlopeFit(slope, intercept, se, slope - half, slope + half, lx.size)
