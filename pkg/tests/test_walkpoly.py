import random
from fractions import Fraction

import numpy as np
import pytest

from nilwalk.errors import InvarianceError, ResourceError, StructuralError
from nilwalk.grouplaw import group_law, multiply, product
from nilwalk.sympoly import SparsePolynomial, UStatisticSpec, mono
from nilwalk.walkpoly import (
    check_product_lemma,
    decomposition_l1,
    expand_product,
    jsonable,
    u_decompose,
    u_evaluate,
    u_evaluate_batch,
    u_recompose,
)

from conftest import rational_vector


def test_expansion_evaluates_to_the_product(h3):
    law = group_law(h3)
    exp = expand_product(law, 4)
    rnd = random.Random(3)
    xs = [rational_vector(h3.spec, rnd) for _ in range(4)]

    def value_of(v):
        k, n, j = v
        return xs[k - 1][(n, j)]

    direct = product(law, xs)
    for label, poly in zip(h3.spec.labels, exp.polys):
        assert poly.evaluate(value_of) == direct[label]


def test_expansion_linear_part_is_the_plain_sum(free23):
    law = group_law(free23)
    exp = expand_product(law, 3)
    for label in free23.spec.labels:
        corr = exp.correction(label)
        n, j = label
        for k in range(1, 4):
            assert mono(((k, n, j), 1)) not in corr.terms


def test_level1_coordinates_have_no_correction(h3, ut4):
    for entry in (h3, ut4):
        exp = expand_product(group_law(entry), 5)
        for j in range(1, entry.spec.dims[0] + 1):
            assert exp.correction((1, j)).is_zero()


def test_expansion_budget_is_enforced(ut4):
    law = group_law(ut4)
    with pytest.raises(ResourceError):
        expand_product(law, 40, max_monomials=50)


def test_expansion_rejects_empty_product(h3):
    with pytest.raises(StructuralError):
        expand_product(group_law(h3), 0)


def test_product_lemma_small(h3, free23):
    for entry in (h3, free23):
        law = group_law(entry)
        report = check_product_lemma(expand_product(law, 2), expand_product(law, 4))
        assert report.ok, report.to_dict()
        names = [c.name for c in report.checks]
        assert names == ["degree-bound", "stability", "invariance"]


def test_product_lemma_wants_ordered_arguments(h3):
    law = group_law(h3)
    a, b = expand_product(law, 2), expand_product(law, 3)
    with pytest.raises(StructuralError):
        check_product_lemma(b, a)


def test_u_decompose_roundtrip(h3):
    law = group_law(h3)
    n = 5
    corr = expand_product(law, n).correction((2, 1))
    parts = u_decompose(corr, n)
    assert u_recompose(parts, n) == corr
    assert decomposition_l1(parts) == sum(abs(c) for _, c in parts)
    # the level-2 correction of this group is the antisymmetric pair sum
    assert {(spec_u.hom_degree, c) for spec_u, c in parts} == {
        (2, Fraction(1, 2)), (2, Fraction(-1, 2))}


def test_u_decompose_rejects_unbalanced_polynomials():
    # one instance of an index shape missing: not index-shape invariant
    poly = SparsePolynomial({
        mono(((1, 1, 1), 1), ((2, 1, 2), 1)): Fraction(1),
        mono(((1, 1, 1), 1), ((3, 1, 2), 1)): Fraction(1),
    })
    with pytest.raises(InvarianceError):
        u_decompose(poly, 3)
    with pytest.raises(InvarianceError):
        u_decompose(SparsePolynomial.const(1), 3)


def test_u_decompose_rejects_mismatched_coefficients():
    poly = SparsePolynomial({
        mono(((1, 1, 1), 1), ((2, 1, 2), 1)): Fraction(1),
        mono(((1, 1, 1), 1), ((3, 1, 2), 1)): Fraction(1),
        mono(((2, 1, 1), 1), ((3, 1, 2), 1)): Fraction(2),
    })
    with pytest.raises(InvarianceError):
        u_decompose(poly, 3)


def test_u_evaluate_exact_matches_expand(h3):
    spec_u = UStatisticSpec([[((1, 1), 1)], [((1, 2), 1), ((2, 1), 1)]])
    rnd = random.Random(9)
    xs = [rational_vector(h3.spec, rnd) for _ in range(6)]
    by_dp = u_evaluate(spec_u, xs)
    poly = spec_u.expand(6)

    def value_of(v):
        k, n, j = v
        return xs[k - 1][(n, j)]

    assert by_dp == poly.evaluate(value_of)


def test_u_evaluate_batch_matches_scalar(h3):
    spec = h3.spec
    spec_u = UStatisticSpec([[((1, 1), 2)], [((2, 1), 1)]])
    rng = np.random.default_rng(4)
    arr = rng.normal(size=(7, 5, spec.total_dim))
    batch = u_evaluate_batch(spec_u, arr, spec)
    from nilwalk.algebra import LieVector
    for s in range(7):
        xs = [LieVector(spec, tuple(float(v) for v in arr[s, l])) for l in range(5)]
        assert batch[s] == pytest.approx(u_evaluate(spec_u, xs), rel=1e-10)


def test_jsonable_flattens_fractions_and_tuple_keys():
    obj = {(1, 2): Fraction(1, 3), "xs": [Fraction(2), (3, Fraction(-1, 2))]}
    out = jsonable(obj)
    assert out == {"(1, 2)": "1/3", "xs": ["2", [3, "-1/2"]]}
