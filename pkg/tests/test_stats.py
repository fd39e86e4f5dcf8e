import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilwalk.stats import ChunkAccumulator, EstimateWithError, loglog_fit


def test_estimate_matches_numpy():
    rng = np.random.default_rng(1)
    values = rng.normal(2.0, 3.0, size=1000)
    acc = ChunkAccumulator()
    acc.add_chunk(values)
    est = acc.estimate()
    assert est.samples == 1000
    assert est.mean == pytest.approx(values.mean(), rel=1e-12)
    assert est.std_error == pytest.approx(
        values.std(ddof=1) / math.sqrt(1000), rel=1e-12)


def test_merge_order_does_not_matter():
    rng = np.random.default_rng(2)
    chunks = [rng.normal(size=n) for n in (17, 250, 3, 64)]
    forward = ChunkAccumulator()
    for c in chunks:
        forward.add_chunk(c)
    backward = ChunkAccumulator()
    for c in reversed(chunks):
        backward.add_chunk(c)
    a, b = forward.estimate(), backward.estimate()
    assert a.samples == b.samples
    assert abs(a.mean - b.mean) <= 1e-12
    assert abs(a.std_error - b.std_error) <= 1e-12


def test_summaries_replay_exactly():
    rng = np.random.default_rng(3)
    values = rng.normal(size=500)
    direct = ChunkAccumulator()
    direct.add_chunk(values)
    replayed = ChunkAccumulator()
    replayed.add_summary(direct.counts[0], direct.sums[0], direct.sqsums[0])
    assert replayed.estimate() == direct.estimate()


def test_degenerate_estimates():
    acc = ChunkAccumulator()
    est = acc.estimate()
    assert math.isnan(est.mean) and est.samples == 0
    acc.add_chunk(np.array([4.0]))
    est = acc.estimate()
    assert est.mean == 4.0 and est.std_error == math.inf
    assert est.interval() == (-math.inf, math.inf)


def test_interval_and_consistency():
    est = EstimateWithError(mean=1.0, std_error=0.1, samples=400)
    lo, hi = est.interval()
    assert lo < 1.0 < hi
    assert (hi - lo) / 2 == pytest.approx(1.96 * 0.1, rel=0.02)
    assert est.consistent_with(1.25)
    assert not est.consistent_with(1.5)


def test_loglog_fit_recovers_exact_power_law():
    xs = [8, 16, 32, 64, 128]
    ys = [5.0 * x ** -1.5 for x in xs]
    fit = loglog_fit(xs, ys)
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(5.0), abs=1e-10)
    assert fit.slope_se == pytest.approx(0.0, abs=1e-10)
    assert fit.points == 5


def test_loglog_fit_weighting_prefers_precise_points():
    xs = [8, 16, 32, 64]
    # three clean points on slope -1, one corrupted point with tiny weight
    ys = [1.0 / 8, 1.0 / 16, 1.0 / 32, 10.0]
    heavy = loglog_fit(xs, ys, weights=[1e6, 1e6, 1e6, 1e-9])
    assert heavy.slope == pytest.approx(-1.0, abs=1e-3)
    flat = loglog_fit(xs, ys)
    assert abs(flat.slope + 1.0) > 0.5


def test_loglog_fit_needs_three_points():
    with pytest.raises(ValueError):
        loglog_fit([2, 4], [1.0, 0.5])


@given(st.floats(min_value=-2.0, max_value=2.0),
       st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=25, deadline=None)
def test_loglog_fit_property(slope, scale):
    xs = [4, 8, 16, 32, 64, 128]
    ys = [scale * x ** slope for x in xs]
    fit = loglog_fit(xs, ys)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert fit.ci_low <= fit.slope <= fit.ci_high


def test_noisy_fit_covers_truth():
    rnd = random.Random(11)
    xs = [8, 16, 32, 64, 128, 256]
    hits = 0
    for _ in range(40):
        ys = [2.0 * x ** -1.0 * math.exp(rnd.gauss(0, 0.05)) for x in xs]
        fit = loglog_fit(xs, ys)
        if fit.ci_low <= -1.0 <= fit.ci_high:
            hits += 1
    assert hits >= 30
