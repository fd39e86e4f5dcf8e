import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilwalk.algebra import (
    GradedBasisSpec,
    LieVector,
    StructureConstants,
    basis_vector,
    bracket,
    dilate,
    validate_algebra,
    zero_vector,
)
from nilwalk.errors import LayerError, StructuralError

from conftest import rational_vector

rationals = st.fractions(
    min_value=Fraction(-8), max_value=Fraction(8), max_denominator=6)


def test_spec_shape_bookkeeping(h3, free23):
    spec = h3.spec
    assert spec.total_dim == 3
    assert spec.homogeneous_dim == 4
    assert spec.labels == ((1, 1), (1, 2), (2, 1))
    assert spec.level_slice(2) == slice(2, 3)
    f = free23.spec
    assert f.total_dim == 5
    assert f.homogeneous_dim == 2 * 1 + 1 * 2 + 2 * 3


def test_spec_rejects_bad_shapes():
    with pytest.raises(StructuralError):
        GradedBasisSpec("bad", 0, ())
    with pytest.raises(StructuralError):
        GradedBasisSpec("bad", 2, (2,))
    with pytest.raises(StructuralError):
        GradedBasisSpec("bad", 2, (0, 1))


def test_vector_layer_and_indexing(h3):
    spec = h3.spec
    x = LieVector(spec, (Fraction(1, 2), Fraction(0), Fraction(3)))
    assert x.layer == "exact"
    assert x[(1, 1)] == Fraction(1, 2)
    assert x.level(2) == (Fraction(3),)
    y = LieVector(spec, (0.5, 0.0, 3.0))
    assert y.layer == "float"
    with pytest.raises(LayerError):
        LieVector(spec, (Fraction(1), 0.5, Fraction(0)))
    with pytest.raises(StructuralError):
        LieVector(spec, (Fraction(1),))


def test_vector_arithmetic_stays_exact(h3):
    spec = h3.spec
    rnd = random.Random(5)
    x = rational_vector(spec, rnd)
    y = rational_vector(spec, rnd)
    s = x + y
    assert s.coords == tuple(a + b for a, b in zip(x.coords, y.coords))
    assert (x - x).coords == zero_vector(spec).coords
    assert (-x).coords == tuple(-a for a in x.coords)


@given(r=rationals.filter(lambda v: v != 0), s=rationals.filter(lambda v: v != 0))
@settings(max_examples=40, deadline=None)
def test_dilation_is_a_graded_action(r, s):
    spec = GradedBasisSpec("t", 3, (2, 1, 2))
    rnd = random.Random(11)
    x = rational_vector(spec, rnd)
    once = dilate(spec, r, dilate(spec, s, x))
    both = dilate(spec, r * s, x)
    assert once.coords == both.coords
    assert dilate(spec, Fraction(1), x).coords == x.coords


def test_dilation_scales_by_level(h3):
    spec = h3.spec
    x = LieVector(spec, (Fraction(1), Fraction(2), Fraction(5)))
    y = dilate(spec, Fraction(3), x)
    assert y.coords == (Fraction(3), Fraction(6), Fraction(45))


def test_bracket_levels_and_antisymmetry(h3):
    spec = h3.spec
    e1 = basis_vector(spec, (1, 1))
    e2 = basis_vector(spec, (1, 2))
    b = bracket(h3.constants, e1, e2)
    assert b.coords == (0, 0, Fraction(1))
    rev = bracket(h3.constants, e2, e1)
    assert rev.coords == (0, 0, Fraction(-1))
    top = bracket(h3.constants, b, e1)
    assert top.coords == zero_vector(spec).coords


def test_validate_catches_antisymmetry_violation():
    spec = GradedBasisSpec("bad", 2, (2, 1))
    consts = StructureConstants(spec, {
        ((1, 1), (1, 2)): {(2, 1): Fraction(1)},
        ((1, 2), (1, 1)): {(2, 1): Fraction(1)},
    })
    report = validate_algebra(spec, consts)
    assert not report.ok
    kinds = {i.kind for i in report.issues}
    assert "antisymmetry" in kinds
    witness = next(i for i in report.issues if i.kind == "antisymmetry")
    assert witness.witness


def test_validate_catches_grading_violation():
    spec = GradedBasisSpec("bad", 2, (2, 1))
    consts = StructureConstants(spec, {
        ((1, 1), (1, 2)): {(1, 1): Fraction(1)},
    })
    report = validate_algebra(spec, consts)
    assert not report.ok
    assert any(i.kind == "grading" for i in report.issues)


def test_validate_catches_jacobi_violation():
    # Jacobi needs three independent generators to fail: with
    # [x1,x2] = z and [x3,z] = w the cyclic sum on (x1,x2,x3) is w != 0.
    spec = GradedBasisSpec("bad", 3, (3, 1, 1))
    consts = StructureConstants(spec, {
        ((1, 1), (1, 2)): {(2, 1): Fraction(1)},
        ((1, 3), (2, 1)): {(3, 1): Fraction(1)},
    })
    report = validate_algebra(spec, consts)
    assert not report.ok
    jacobi = [i for i in report.issues if i.kind == "jacobi"]
    assert jacobi
    assert jacobi[0].witness


def test_validate_accepts_consistent_step3_tensor():
    spec = GradedBasisSpec("ok", 3, (2, 1, 2))
    consts = StructureConstants(spec, {
        ((1, 1), (1, 2)): {(2, 1): Fraction(1)},
        ((1, 1), (2, 1)): {(3, 1): Fraction(1)},
        ((1, 2), (2, 1)): {(3, 2): Fraction(1)},
    })
    report = validate_algebra(spec, consts)
    assert report.ok, [i.message for i in report.issues]


def test_validate_rejects_unknown_labels():
    spec = GradedBasisSpec("bad", 2, (2, 1))
    consts = StructureConstants(spec, {
        ((1, 1), (1, 3)): {(2, 1): Fraction(1)},
    })
    with pytest.raises(StructuralError):
        validate_algebra(spec, consts)


def test_catalog_algebras_validate(h3, ut4, free23):
    for entry in (h3, ut4, free23):
        report = validate_algebra(entry.spec, entry.constants)
        assert report.ok, entry.spec.name
