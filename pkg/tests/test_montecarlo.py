import math
from fractions import Fraction
from itertools import product as iproduct

import numpy as np
import pytest

from nilwalk.errors import ConfigError, MeasureError, ResourceError
from nilwalk.grouplaw import group_law, multiply, product
from nilwalk.algebra import LieVector
from nilwalk.measures import (
    Discrete,
    default_box_measure,
    matched_measure,
    rademacher_measure,
)
from nilwalk.montecarlo import (
    ExperimentConfig,
    FrequencyWindow,
    PolynomialMap,
    char_fn_estimate,
    enumeration_affordable,
    exact_power_moment,
    exact_walk_char,
    exact_walk_distribution,
    lindeberg_gap,
    llt_gap,
    moment_growth,
    random_polynomial_map,
    random_power_map,
    scaled_frequency,
    sublevel_measure,
    truncation_tail_check,
    walk_functional,
)
from nilwalk.sympoly import SparsePolynomial, UStatisticSpec
from nilwalk.testfn import ProductTestFunction, Tent, centered_tent
from nilwalk.walkpoly import u_evaluate

F = Fraction


def mu3(spec):
    return Discrete(spec, (
        (F(1), F(0), F(0)),
        (F(0), F(1), F(0)),
        (F(-1), F(-1), F(0)),
    ), (F(1, 3), F(1, 3), F(1, 3)))


SIGNED_AREA = [
    (UStatisticSpec([[((1, 1), 1)], [((1, 2), 1)]]), F(1, 2)),
    (UStatisticSpec([[((1, 2), 1)], [((1, 1), 1)]]), F(-1, 2)),
]


def test_experiment_config_validation():
    good = dict(experiment_id="e", group="heisenberg3", kind="char-fn",
                schedule=(2, 4), samples=2000, seed=1)
    ExperimentConfig(**good)
    for bad in (
        dict(good, experiment_id=""),
        dict(good, kind="warp-drive"),
        dict(good, schedule=()),
        dict(good, schedule=(4, 2)),
        dict(good, schedule=(2, 2)),
        dict(good, samples=999),
        dict(good, threads=0),
    ):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)


def test_frequency_window_validation(h3, ut4):
    FrequencyWindow(h3.spec, (0.08, 0.01))
    with pytest.raises(ConfigError):
        FrequencyWindow(h3.spec, (0.08,))
    with pytest.raises(ConfigError):
        FrequencyWindow(h3.spec, (0.08, -0.01))
    with pytest.raises(ConfigError):
        FrequencyWindow(h3.spec, (0.01, 0.01))
    win3 = FrequencyWindow.default(ut4.spec)
    assert len(win3.epsilons) == 3
    for n in range(1, 3):
        assert win3.epsilons[n - 1] > n * win3.epsilons[n]


def test_frequency_window_membership(h3):
    win = FrequencyWindow.default(h3.spec)
    assert win.contains((0.0, 0.0, 0.0), 64)
    assert not win.contains((5.0, 0.0, 0.0), 64)
    eta = (0.2, 0.2, 0.3)
    for N in (16, 64, 256):
        assert win.contains(scaled_frequency(h3.spec, eta, N), N)


def test_scaled_frequency_scales_by_level(ut4):
    row = scaled_frequency(ut4.spec, (1.0,) * 6, 16)
    assert row[:3] == pytest.approx([0.25] * 3)
    assert row[3:5] == pytest.approx([1 / 16] * 2)
    assert row[5] == pytest.approx(16 ** -1.5)


def test_walk_functional_point_mass_has_zero_error(h3):
    # a point mass walks deterministically, so the estimate is exact
    pm = Discrete(h3.spec, ((F(0), F(0), F(3)),), (F(1),))
    f = ProductTestFunction((Tent(0.0, 1.0, 1.0), Tent(0.0, 1.0, 1.0),
                             Tent(3.0, 1.0, 1.0)))
    est = walk_functional(h3, pm, N=9, f=f, samples=2048, seed=5)
    assert est.mean == pytest.approx(1.0, abs=1e-12)
    assert est.std_error == 0.0
    assert est.samples == 2048


def test_walk_functional_applies_translations_after_scaling(h3):
    pm = Discrete(h3.spec, ((F(1), F(-1, 2), F(1, 4)),), (F(1),))
    law = group_law(h3)
    N = 4
    g = LieVector(h3.spec, (F(1, 3), F(0), F(-1)))
    h = LieVector(h3.spec, (F(-1, 5), F(2), F(0)))
    endpoint = product(law, [LieVector(h3.spec, pm.atoms[0])] * N)
    from nilwalk.algebra import dilate
    scaled = dilate(h3.spec, F(1, 2), endpoint)   # N^(-1/2) with N = 4
    translated = product(law, [g, scaled, h])
    f = lambda arr: arr[:, 2]
    est = walk_functional(h3, pm, N=N, f=f, g=g, h=h, samples=1024, seed=1)
    assert est.mean == pytest.approx(float(translated[(2, 1)]), rel=1e-12)
    assert est.std_error == 0.0


def test_walk_functional_thread_count_is_invisible(h3):
    mu = matched_measure(h3, mu3(h3.spec))
    f = centered_tent(3, half_width=1.5)
    kw = dict(N=8, f=f, samples=70_000, seed=42)
    a = walk_functional(h3, mu, **kw, threads=1)
    b = walk_functional(h3, mu, **kw, threads=4)
    assert a == b


def test_antithetic_needs_symmetry(h3):
    f = centered_tent(3)
    with pytest.raises(MeasureError):
        walk_functional(h3, mu3(h3.spec), N=4, f=f, samples=1024, antithetic=True)
    est = walk_functional(h3, rademacher_measure(h3), N=4, f=f,
                          samples=2048, seed=3, antithetic=True)
    assert math.isfinite(est.mean)


def test_char_fn_estimate_agrees_with_enumeration(h3):
    mu = mu3(h3.spec)
    est = char_fn_estimate(h3, mu, N=6, xi=(0.21, -0.13, 0.4),
                           samples=60_000, seed=9)
    assert est.exact is not None
    assert est.consistent(4.0), (est.value, est.exact, est.std_error)
    assert abs(est.value) <= 1.0 + 4 * est.std_error
    direct = exact_walk_char(h3, mu, 6, (0.21, -0.13, 0.4))
    assert est.exact == direct


def test_exact_walk_distribution_matches_brute_force(h3):
    mu = mu3(h3.spec)
    law = group_law(h3)
    dist = exact_walk_distribution(h3, mu, 2)
    assert sum(dist.values()) == 1
    brute = {}
    atoms = [LieVector(h3.spec, a) for a in mu.atoms]
    for (a, wa), (b, wb) in iproduct(zip(atoms, mu.weights), repeat=2):
        key = multiply(law, a, b).coords
        brute[key] = brute.get(key, F(0)) + wa * wb
    assert dist == brute


def test_enumeration_budgets(h3):
    mu = mu3(h3.spec)
    assert enumeration_affordable(mu, 10)
    assert not enumeration_affordable(mu, 13)
    assert not enumeration_affordable(default_box_measure(h3), 2)
    with pytest.raises(ResourceError):
        exact_walk_distribution(h3, mu, 13)


def test_exact_power_moment_against_brute_force(h3):
    rad = rademacher_measure(h3)
    N = 4
    atoms = [LieVector(h3.spec, a) for a in rad.atoms]
    total = F(0)
    for combo in iproduct(range(len(atoms)), repeat=N):
        xs = [atoms[i] for i in combo]
        val = sum((c * u_evaluate(spec_u, xs) for spec_u, c in SIGNED_AREA), F(0))
        w = F(1)
        for i in combo:
            w *= rad.weights[i]
        total += w * val ** 2
    assert exact_power_moment(SIGNED_AREA, rad, N, 2) == total

    plain = UStatisticSpec([[((1, 1), 1)]])
    for n in (3, 7, 12):
        assert exact_power_moment(plain, rad, n, 2) == n


def test_exact_power_moment_budget(h3):
    spec_u = UStatisticSpec([[((1, 1), 1)], [((1, 1), 1)], [((1, 1), 1)]])
    with pytest.raises(ResourceError):
        exact_power_moment(spec_u, rademacher_measure(h3), 8, 6, work_budget=10)


def test_moment_growth_small_schedule(h3):
    rad = rademacher_measure(h3)
    report = moment_growth(h3, SIGNED_AREA, rad, m=1, schedule=(8, 16, 32),
                           samples=20_000, seed=7)
    assert report.quantity == "moment_growth_m1_w2"
    assert report.target_slope == 2.0
    for p in report.points:
        assert p.exact is not None
        err = abs(p.estimate.mean - float(p.exact))
        assert err <= 5 * p.estimate.std_error, (p.N, err, p.estimate.std_error)
        assert p.tail_ratio is not None
    assert report.fit is not None
    assert report.fit.slope == pytest.approx(2.0, abs=0.35)
    rows = report.csv_rows()
    assert [r["N"] for r in rows] == [8, 16, 32, 0]
    assert rows[-1]["quantity"] == "moment_growth_m1_w2_slope"


def test_moment_growth_rejects_mixed_weights(h3):
    mixed = [
        (UStatisticSpec([[((1, 1), 1)]]), F(1)),
        (UStatisticSpec([[((2, 1), 1)]]), F(1)),
    ]
    # weights 1 and 2 cannot share a growth exponent
    with pytest.raises(ConfigError):
        moment_growth(h3, mixed, rademacher_measure(h3), m=1, schedule=(8, 16, 32),
                      samples=1000)


def test_truncation_tail_points(h3):
    box = default_box_measure(h3)
    pts = truncation_tail_check(h3, box, (4, 16), delta=0.4, samples=4000, seed=3)
    assert [p.N for p in pts] == [4, 16]
    for p in pts:
        assert p.threshold == pytest.approx(float(p.N) ** 0.4)
        assert 0.0 <= p.frequency <= 1.0
        assert p.samples == 4000
        assert p.exceed_count == round(p.frequency * p.samples)


def _same_gap_points(ps, qs):
    assert len(ps) == len(qs)
    for p, q in zip(ps, qs):
        assert (p.N, p.samples_a, p.samples_b) == (q.N, q.samples_a, q.samples_b)
        assert (p.converged, p.in_window) == (q.converged, q.in_window)
        for a, b in ((p.gap, q.gap), (p.std_error, q.std_error)):
            assert a == b or (math.isnan(a) and math.isnan(b))


def test_lindeberg_gap_structure_and_determinism(h3):
    mu = rademacher_measure(h3)
    phi = matched_measure(h3, mu)
    kw = dict(schedule=(8, 16, 32), eta=(0.2, 0.2, 0.3), seed=11,
              noise_factor=3.0, initial_samples=1 << 12,
              total_cap=300_000, max_waves=3)
    rep = lindeberg_gap(h3, mu, phi, **kw)
    again = lindeberg_gap(h3, mu, phi, **kw)
    _same_gap_points(rep.points, again.points)
    threaded = lindeberg_gap(h3, mu, phi, **kw, threads=3)
    _same_gap_points(rep.points, threaded.points)
    assert rep.points[0].samples_a > 0
    assert rep.quantity == "lindeberg_gap"
    assert rep.target_slope == -1.0
    assert all(p.in_window for p in rep.points)
    assert rep.total_samples <= 300_000
    rows = rep.csv_rows()
    assert [r["N"] for r in rows[:3]] == [8, 16, 32]
    d = rep.to_dict()
    assert set(d) >= {"quantity", "points", "fit", "inconclusive", "total_samples"}


def test_llt_gap_matched_pair_decays_fast(h3):
    # weight-3-matched pair: the gap visibly decays faster than N^(-0.3)
    mu = mu3(h3.spec)
    phi = matched_measure(h3, mu)
    rep = llt_gap(h3, mu, phi, centered_tent(3, half_width=1.0),
                  schedule=(16, 32, 64, 128), seed=13,
                  noise_factor=3.0, initial_samples=1 << 15,
                  total_cap=8_000_000, max_waves=8)
    assert rep.quantity == "llt_gap"
    assert rep.target_slope == -0.5
    assert rep.fit is not None, rep.to_dict()
    assert rep.fit.slope <= -0.3, rep.fit
    first, last = rep.points[0], rep.points[-1]
    assert first.converged and first.gap > 0
    assert not (last.gap > 2 * first.gap)


def test_sublevel_ratio_closed_form_linear():
    # |x| <= alpha on the unit box has measure exactly 2 alpha
    pmap = PolynomialMap(1, (SparsePolynomial.variable((1, 1, 1)),))
    rep = sublevel_measure(pmap, alphas=(0.2, 0.05, 0.01), heights=(1.0, 10.0),
                           points=1 << 16, seed=3)
    assert rep.degree == 1
    assert rep.points == 1 << 16
    for cell in rep.cells:
        assert cell.ratio == pytest.approx(2.0, abs=0.08), cell


def test_sublevel_ratio_closed_form_square():
    rng = np.random.default_rng(8)
    pmap = random_power_map(1, 2, rng)
    rep = sublevel_measure(pmap, alphas=(0.1, 0.01), points=1 << 16, seed=4)
    assert rep.degree == 2
    for cell in rep.cells:
        assert cell.ratio == pytest.approx(2.0, abs=0.08), cell


def test_sublevel_determinism_and_validation():
    pmap = PolynomialMap(1, (SparsePolynomial.variable((1, 1, 1)),))
    a = sublevel_measure(pmap, alphas=(0.1,), points=1 << 12, seed=5)
    b = sublevel_measure(pmap, alphas=(0.1,), points=1 << 12, seed=5)
    assert a == b
    with pytest.raises(ConfigError):
        sublevel_measure(pmap, alphas=(0.1,), points=1)


def test_random_map_families():
    rng = np.random.default_rng(17)
    pmap = random_polynomial_map(3, 2, rng)
    assert pmap.dim == 3
    assert 1 <= pmap.degree <= 2
    assert pmap.height == 1.0
    assert all(m for p in pmap.polys for m in p.terms)  # no constant term
    power = random_power_map(2, 3, rng)
    assert power.degree == 3
    assert power.height == 1.0
    with pytest.raises(ConfigError):
        PolynomialMap(1, (SparsePolynomial.variable((1, 1, 2)),))


def test_polynomial_map_norm_evaluation():
    pmap = PolynomialMap(2, (
        SparsePolynomial.variable((1, 1, 1)),
        SparsePolynomial.variable((1, 1, 2)),
    ))
    pts = np.array([[0.3, -0.4], [0.0, 0.0]])
    np.testing.assert_allclose(pmap.evaluate(pts), [0.5, 0.0], atol=1e-15)
