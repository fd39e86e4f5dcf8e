import random
from fractions import Fraction

import numpy as np
import pytest

from nilwalk.algebra import LieVector, dilate, zero_vector
from nilwalk.errors import LayerError, StructuralError
from nilwalk.grouplaw import (
    compiled_law,
    conjugate,
    group_law,
    inverse,
    law_from_json,
    law_to_json,
    multiply,
    product,
    translate_polynomials,
)
from nilwalk.matrixoracle import matrix_oracle_product

from conftest import rational_vector


@pytest.fixture(params=["heisenberg3", "ut4", "free2step3"])
def entry(request, h3, ut4, free23):
    return {"heisenberg3": h3, "ut4": ut4, "free2step3": free23}[request.param]


def test_group_axioms_on_random_rationals(entry):
    law = group_law(entry)
    spec = entry.spec
    rnd = random.Random(13)
    e = zero_vector(spec)
    for _ in range(25):
        x = rational_vector(spec, rnd)
        y = rational_vector(spec, rnd)
        z = rational_vector(spec, rnd)
        assert multiply(law, x, e).coords == x.coords
        assert multiply(law, e, x).coords == x.coords
        assert multiply(law, x, inverse(x)).is_zero()
        left = multiply(law, multiply(law, x, y), z)
        right = multiply(law, x, multiply(law, y, z))
        assert left.coords == right.coords


def test_heisenberg_law_closed_form(h3):
    # product coordinates: (a1+b1, a2+b2, a3+b3 + (a1 b2 - a2 b1)/2)
    law = group_law(h3)
    x = LieVector(h3.spec, (Fraction(1), Fraction(2), Fraction(3)))
    y = LieVector(h3.spec, (Fraction(5), Fraction(7), Fraction(11)))
    z = multiply(law, x, y)
    assert z.coords == (
        Fraction(6), Fraction(9), Fraction(14) + Fraction(1 * 7 - 2 * 5, 2))


def test_dilation_is_a_group_automorphism(entry):
    law = group_law(entry)
    spec = entry.spec
    rnd = random.Random(17)
    r = Fraction(3, 2)
    for _ in range(10):
        x = rational_vector(spec, rnd)
        y = rational_vector(spec, rnd)
        lhs = dilate(spec, r, multiply(law, x, y))
        rhs = multiply(law, dilate(spec, r, x), dilate(spec, r, y))
        assert lhs.coords == rhs.coords


def test_product_and_conjugate(entry):
    law = group_law(entry)
    rnd = random.Random(23)
    xs = [rational_vector(entry.spec, rnd) for _ in range(4)]
    out = product(law, xs)
    step = xs[0]
    for x in xs[1:]:
        step = multiply(law, step, x)
    assert out.coords == step.coords
    assert product(law, []).is_zero()
    g, x = xs[0], xs[1]
    c = conjugate(law, g, x)
    back = product(law, [inverse(g), c, g])
    assert back.coords == x.coords


def test_multiply_rejects_foreign_vectors(h3, ut4):
    law = group_law(h3)
    with pytest.raises(StructuralError):
        multiply(law, zero_vector(h3.spec), zero_vector(ut4.spec))


def test_law_agrees_with_matrix_oracle(entry):
    law = group_law(entry)
    rnd = random.Random(31)
    for _ in range(10):
        xs = [rational_vector(entry.spec, rnd) for _ in range(3)]
        assert product(law, xs).coords == matrix_oracle_product(entry, xs).coords


def test_matrix_oracle_exact_layer_only(h3):
    x = LieVector(h3.spec, (0.5, 0.25, 1.0))
    with pytest.raises(LayerError):
        matrix_oracle_product(h3, [x, x])


def test_law_json_roundtrip(entry):
    law = group_law(entry)
    text = law_to_json(law)
    back = law_from_json(text, entry)
    assert back.polys == law.polys
    with pytest.raises(StructuralError):
        law_from_json(text.replace(f'"step": {entry.spec.step}', '"step": 9'), entry)


def test_translation_matches_group_product(entry):
    law = group_law(entry)
    rnd = random.Random(41)
    g = rational_vector(entry.spec, rnd)
    h = rational_vector(entry.spec, rnd)
    tp = translate_polynomials(law, g, h)
    for _ in range(8):
        x = rational_vector(entry.spec, rnd)
        via_product = product(law, [g, x, h])
        assert tp.apply(x).coords == via_product.coords
        assert tp.apply_inverse(tp.apply(x)).coords == x.coords
    assert tp.height > 0


def test_translation_identity_is_identity(h3):
    law = group_law(h3)
    e = zero_vector(h3.spec)
    tp = translate_polynomials(law, e, e)
    rnd = random.Random(43)
    x = rational_vector(h3.spec, rnd)
    assert tp.apply(x).coords == x.coords


def test_compiled_law_matches_exact(entry):
    law = group_law(entry)
    comp = compiled_law(entry)
    rnd = random.Random(47)
    pairs = []
    for _ in range(20):
        x = rational_vector(entry.spec, rnd)
        y = rational_vector(entry.spec, rnd)
        pairs.append((x, y))
    xs = np.array([[float(c) for c in x.coords] for x, _ in pairs])
    ys = np.array([[float(c) for c in y.coords] for _, y in pairs])
    batch = comp(xs, ys)
    for row, (x, y) in zip(batch, pairs):
        exact = multiply(law, x, y)
        np.testing.assert_allclose(
            row, [float(c) for c in exact.coords], rtol=1e-12, atol=1e-12)


def test_float_layer_multiplication(h3):
    law = group_law(h3)
    x = LieVector(h3.spec, (0.5, -1.25, 2.0))
    y = LieVector(h3.spec, (1.5, 0.75, -0.5))
    z = multiply(law, x, y)
    assert z.layer == "float"
    assert z.coords[0] == pytest.approx(2.0)
    assert z.coords[2] == pytest.approx(1.5 + 0.5 * (0.5 * 0.75 - (-1.25) * 1.5))
