import numpy as np
import pytest
from scipy import integrate

from nilwalk.errors import StructuralError
from nilwalk.testfn import (
    BoxSmoothed,
    CosineBump,
    ProductTestFunction,
    RampIndicator,
    Tent,
    centered_bump,
    centered_tent,
)

PIECES = [
    Tent(0.0, 1.0, 1.0),
    Tent(0.75, 1.5, 2.0),
    CosineBump(0.0, 1.0, 1.0),
    CosineBump(-0.3, 0.8, 1.7),
    RampIndicator(-1.0, 2.0, 0.25),
]


@pytest.mark.parametrize("piece", PIECES, ids=lambda p: type(p).__name__)
def test_closed_forms_match_quadrature(piece):
    a, b = piece.support
    val, err = integrate.quad(lambda t: float(piece(t)), a, b, limit=200)
    assert val == pytest.approx(piece.integral, abs=1e-7)
    grid = np.linspace(a, b, 20001)
    vals = piece(grid)
    assert vals.max() == pytest.approx(piece.sup, abs=1e-4)
    slopes = np.abs(np.diff(vals) / np.diff(grid))
    assert slopes.max() <= piece.lip * (1 + 1e-6)
    # vanishes outside the support
    assert piece(a - 1.0) == 0.0
    assert piece(b + 1.0) == 0.0


@pytest.mark.parametrize("piece", PIECES, ids=lambda p: type(p).__name__)
def test_antiderivative_matches_quadrature(piece):
    a, b = piece.support
    for t in np.linspace(a - 0.5, b + 0.5, 13):
        val, _ = integrate.quad(lambda u: float(piece(u)), a, t, limit=200)
        assert float(piece.antiderivative(t)) == pytest.approx(val, abs=1e-7)
    assert float(piece.antiderivative(a)) == pytest.approx(0.0, abs=1e-12)
    assert float(piece.antiderivative(b)) == pytest.approx(piece.integral, abs=1e-7)


def test_piece_validation():
    with pytest.raises(StructuralError):
        Tent(0.0, -1.0, 1.0)
    with pytest.raises(StructuralError):
        CosineBump(0.0, 1.0, 0.0)
    with pytest.raises(StructuralError):
        RampIndicator(0.0, 0.3, 0.25)
    with pytest.raises(StructuralError):
        RampIndicator(0.0, 1.0, -0.1)


def test_ramp_shape():
    ramp = RampIndicator(-1.0, 1.0, 0.5)
    assert float(ramp(0.0)) == 1.0
    assert float(ramp(-1.0)) == 0.5
    assert float(ramp(1.0)) == 0.5
    assert float(ramp(-1.5)) == 0.0
    assert ramp.sup == 1.0
    assert ramp.lip == 1.0


def test_smoothing_preserves_integral_and_caps_slope():
    tent = Tent(0.0, 1.0, 1.0)
    sm = BoxSmoothed(tent, eps=0.2)
    a, b = sm.support
    assert (a, b) == (-1.2, 1.2)
    val, _ = integrate.quad(lambda t: float(sm(t)), a, b, limit=200)
    assert val == pytest.approx(tent.integral, abs=1e-7)
    assert sm.lip <= tent.lip
    # smoothing a unit tent by 0.2 rounds the peak down
    assert float(sm(0.0)) == pytest.approx(0.9, abs=1e-12)
    with pytest.raises(StructuralError):
        BoxSmoothed(sm, eps=0.1)
    with pytest.raises(StructuralError):
        sm.antiderivative(0.0)


def test_product_closed_forms():
    f = ProductTestFunction((Tent(0.0, 1.0, 1.0), RampIndicator(-1.0, 1.0, 0.5)))
    assert f.dim == 2
    assert f.integral == pytest.approx(1.0 * 2.0)
    assert f.sup == pytest.approx(1.0)
    assert f.lip == pytest.approx(1.0 * 1.0 + 1.0 * 1.0)
    vals = f(np.array([[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]]))
    assert vals == pytest.approx([1.0, 0.5, 0.0])
    with pytest.raises(StructuralError):
        f(np.zeros((3, 3)))
    with pytest.raises(StructuralError):
        ProductTestFunction(())


def test_product_lip_bounds_finite_differences():
    f = ProductTestFunction((Tent(0.2, 0.9, 1.3), CosineBump(0.0, 1.1, 0.8)))
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.5, 1.5, size=(4000, 2))
    shifts = rng.uniform(-0.01, 0.01, size=(4000, 2))
    before = f(pts)
    after = f(pts + shifts)
    dist = np.abs(shifts).max(axis=1)
    mask = dist > 0
    ratio = np.abs(after - before)[mask] / dist[mask]
    assert ratio.max() <= f.lip * (1 + 1e-9)


def test_product_smoothed_applies_per_coordinate():
    f = centered_tent(2, half_width=1.0)
    sm = f.smoothed(0.25)
    assert all(isinstance(p, BoxSmoothed) for p in sm.pieces)
    assert sm.integral == pytest.approx(f.integral)
    assert float(sm(np.array([[0.0, 0.0]]))[0]) < 1.0


def test_centered_builders():
    tent = centered_tent(3, half_width=2.0)
    bump = centered_bump(2)
    assert tent.dim == 3 and bump.dim == 2
    assert tent(np.zeros((1, 3)))[0] == pytest.approx(1.0)
    assert bump(np.zeros((1, 2)))[0] == pytest.approx(1.0)
    # even in every coordinate
    pt = np.array([[0.4, -0.9, 1.1]])
    assert tent(pt)[0] == pytest.approx(tent(-pt)[0])
