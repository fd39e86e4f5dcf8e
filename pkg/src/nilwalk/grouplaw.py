"""Exact polynomial group law in exponential coordinates.

The product of two group elements written in exponential coordinates is a
polynomial map; its coordinates are produced once per algebra from the
nested-commutator series (the series truncates at the step, so the result
is exact).  Everything downstream evaluates these polynomials: exact
products, float products, vectorized Monte Carlo batches, and translated
observables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from .algebra import LieVector, scalar_layer, zero_vector
from .catalog import CatalogEntry
from .errors import LayerError, StructuralError
from .sympoly import Monomial, SparsePolynomial, mono_hom_degree

_LEFT, _RIGHT = 1, 2


@dataclass(frozen=True)
class GroupLawTable:
    """One polynomial per output label; variables (1,n,j) left, (2,n,j) right."""

    entry: CatalogEntry
    polys: tuple[SparsePolynomial, ...]

    @property
    def spec(self):
        return self.entry.spec


def _poly_vec_bracket(consts, u, v):
    """Bracket of two polynomial-coefficient vectors."""
    spec = consts.spec
    out = [SparsePolynomial() for _ in range(spec.total_dim)]
    idx = spec.index
    for (a, b), vec in consts.table.items():
        ia, ib = idx(a), idx(b)
        if (b, a) in consts.table and a != b:
            coef = u[ia] * v[ib]
        else:
            coef = u[ia] * v[ib] - u[ib] * v[ia]
        if not coef.is_zero():
            for lbl, c in vec.items():
                out[idx(lbl)].add_scaled(coef, c)
    return out


def _dynkin_words(step: int) -> dict[tuple[int, ...], Fraction]:
    """Word -> coefficient for the nested-commutator product series.

    Words are tuples over {0, 1} (left/right letter); the bracket is taken
    right-nested.  Coefficients follow the permutation-count form of the
    series, grouped here by word with denominators accumulated exactly.
    """
    coeffs: dict[tuple[int, ...], Fraction] = {}

    def parts(n_groups: int, prefix, r_s_product: int, total: int):
        if total > step:
            return
        if n_groups == 0:
            if total == 0:
                return
            word = tuple(prefix)
            c = Fraction((-1) ** (count_groups[0] - 1), count_groups[0])
            c /= total * r_s_product
            coeffs[word] = coeffs.get(word, Fraction(0)) + c
            return
        for r in range(0, step - total + 1):
            for s in range(0, step - total - r + 1):
                if r + s == 0:
                    continue
                parts(
                    n_groups - 1,
                    prefix + [0] * r + [1] * s,
                    r_s_product * factorial(r) * factorial(s),
                    total + r + s,
                )

    count_groups = [0]
    for n in range(1, step + 1):
        count_groups[0] = n
        parts(n, [], 1, 0)
    return {w: c for w, c in coeffs.items() if c}


def build_group_law(entry: CatalogEntry) -> GroupLawTable:
    spec, consts = entry.spec, entry.constants
    q = spec.total_dim
    xs = [SparsePolynomial.variable((_LEFT, n, j)) for (n, j) in spec.labels]
    ys = [SparsePolynomial.variable((_RIGHT, n, j)) for (n, j) in spec.labels]
    letters = {0: xs, 1: ys}

    total = [xs[m] + ys[m] for m in range(q)]
    nested_cache: dict[tuple[int, ...], list] = {}

    def nested(word: tuple[int, ...]):
        if word in nested_cache:
            return nested_cache[word]
        if len(word) == 1:
            vec = letters[word[0]]
        else:
            vec = _poly_vec_bracket(consts, letters[word[0]], nested(word[1:]))
        nested_cache[word] = vec
        return vec

    for word, c in sorted(_dynkin_words(spec.step).items()):
        if len(word) == 1:
            continue  # single letters already accounted by x + y
        vec = nested(word)
        for m in range(q):
            total[m].add_scaled(vec[m], c)

    labels = spec.labels
    for m, poly in enumerate(total):
        n = labels[m][0]
        if n == 1:
            expect = xs[m] + ys[m]
            if poly != expect:
                raise StructuralError("level-1 group law is not coordinate addition")
        for mono in poly.terms:
            if mono_hom_degree(mono) > n:
                raise StructuralError(
                    f"law coordinate {labels[m]} contains degree above its level"
                )
    return GroupLawTable(entry, tuple(total))


_LAW_CACHE: dict[str, GroupLawTable] = {}


def group_law(entry: CatalogEntry) -> GroupLawTable:
    law = _LAW_CACHE.get(entry.spec.name)
    if law is None or law.entry is not entry:
        law = build_group_law(entry)
        _LAW_CACHE[entry.spec.name] = law
    return law


def multiply(law: GroupLawTable, x: LieVector, y: LieVector) -> LieVector:
    spec = law.spec
    if x.algebra != spec or y.algebra != spec:
        raise StructuralError("operands do not belong to the law's group")
    layer = scalar_layer(x.coords + y.coords)
    if layer == "exact":
        def value_of(v):
            side, n, j = v
            vec = x if side == _LEFT else y
            return vec.coords[spec.index((n, j))]
        coords = tuple(p.evaluate(value_of) for p in law.polys)
    else:
        def value_of(v):
            side, n, j = v
            vec = x if side == _LEFT else y
            return vec.coords[spec.index((n, j))]
        coords = tuple(p.evaluate_float(value_of) for p in law.polys)
    return LieVector(spec, coords)


def inverse(x: LieVector) -> LieVector:
    """Group inverse; in exponential coordinates this is negation."""
    return -x


def product(law: GroupLawTable, xs) -> LieVector:
    """Left-to-right product of a sequence of group elements."""
    xs = list(xs)
    if not xs:
        return zero_vector(law.spec)
    out = xs[0]
    for x in xs[1:]:
        out = multiply(law, out, x)
    return out


def conjugate(law: GroupLawTable, g: LieVector, x: LieVector) -> LieVector:
    return product(law, [g, x, inverse(g)])


# ---------------------------------------------------------------------------
# translated observables

@dataclass(frozen=True)
class TranslatePolynomials:
    """Coordinates of x -> log(g * exp(x) * h) and of the inverse map."""

    entry: CatalogEntry
    g: LieVector
    h: LieVector
    forward: tuple[SparsePolynomial, ...]
    backward: tuple[SparsePolynomial, ...]

    @property
    def height(self) -> Fraction:
        return max(
            (abs(c) for p in self.forward for c in p.terms.values()),
            default=Fraction(0),
        )

    def apply(self, x: LieVector) -> LieVector:
        return _apply_polys(self.entry, self.forward, x)

    def apply_inverse(self, x: LieVector) -> LieVector:
        return _apply_polys(self.entry, self.backward, x)


def _apply_polys(entry, polys, x: LieVector) -> LieVector:
    spec = entry.spec

    def value_of(v):
        _, n, j = v
        return x.coords[spec.index((n, j))]

    if scalar_layer(x.coords) == "exact":
        coords = tuple(p.evaluate(value_of) for p in polys)
    else:
        coords = tuple(p.evaluate_float(value_of) for p in polys)
    return LieVector(spec, coords)


def _translate_one_sided(law: GroupLawTable, g: LieVector, h: LieVector):
    spec = law.spec
    q = spec.total_dim
    fresh = [SparsePolynomial.variable((_LEFT, n, j)) for (n, j) in spec.labels]

    def subst(polys_for_x, const_y=None, const_x=None):
        def image_of(v):
            side, n, j = v
            m = spec.index((n, j))
            if side == _LEFT:
                if const_x is not None:
                    return SparsePolynomial.const(const_x.coords[m])
                return polys_for_x[m]
            if const_y is not None:
                return SparsePolynomial.const(const_y.coords[m])
            return fresh[m]
        return [law.polys[m].substitute(image_of) for m in range(q)]

    # w = g * x, then w * h
    w = subst(None, const_y=None, const_x=g)
    return tuple(subst(w, const_y=h))


def translate_polynomials(law: GroupLawTable, g: LieVector, h: LieVector) -> TranslatePolynomials:
    """Exact polynomial form of the two-sided translation and its inverse."""
    for v in (g, h):
        if scalar_layer(v.coords) != "exact":
            raise LayerError("translation polynomials are exact-layer only")
    forward = _translate_one_sided(law, g, h)
    backward = _translate_one_sided(law, inverse(g), inverse(h))
    return TranslatePolynomials(law.entry, g, h, forward, backward)


# ---------------------------------------------------------------------------
# vectorized evaluation

@dataclass(frozen=True)
class CompiledLaw:
    """Float evaluator for batched products: (S, q) x (S, q) -> (S, q)."""

    law: GroupLawTable
    terms: tuple  # per label: tuple of (coeff, ((side, col, exp), ...))

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        rows = max(x.shape[0], y.shape[0])
        if x.shape[0] != rows:
            x = np.broadcast_to(x, (rows, x.shape[1]))
        if y.shape[0] != rows:
            y = np.broadcast_to(y, (rows, y.shape[1]))
        out = np.zeros((rows, x.shape[1]))
        operands = (x, y)
        for m, termlist in enumerate(self.terms):
            col = out[:, m]
            for coeff, ops in termlist:
                term = None
                for side, c, e in ops:
                    f = operands[side][:, c]
                    if e > 1:
                        f = f ** e
                    term = f if term is None else term * f
                col += coeff * term if term is not None else coeff
        return out


def compile_law(law: GroupLawTable) -> CompiledLaw:
    spec = law.spec
    compiled = []
    for p in law.polys:
        termlist = []
        for m, c in p.sorted_terms():
            ops = tuple(
                (0 if v[0] == _LEFT else 1, spec.index((v[1], v[2])), e)
                for v, e in m
            )
            termlist.append((float(c), ops))
        compiled.append(tuple(termlist))
    return CompiledLaw(law, tuple(compiled))


_COMPILED_CACHE: dict[str, CompiledLaw] = {}


def compiled_law(entry: CatalogEntry) -> CompiledLaw:
    c = _COMPILED_CACHE.get(entry.spec.name)
    if c is None or c.law.entry is not entry:
        c = compile_law(group_law(entry))
        _COMPILED_CACHE[entry.spec.name] = c
    return c


# ---------------------------------------------------------------------------
# JSON form of the law

def law_to_json(law: GroupLawTable) -> str:
    spec = law.spec
    out = {
        "group": spec.name,
        "step": spec.step,
        "dims": list(spec.dims),
        "law": {},
    }
    for label, poly in zip(spec.labels, law.polys):
        rows = []
        for m, c in poly.sorted_terms():
            monomial = [
                [["x" if v[0] == _LEFT else "y", v[1], v[2]], e]
                for v, e in m
            ]
            rows.append({
                "monomial": monomial,
                "num": c.numerator,
                "den": c.denominator,
            })
        out["law"][f"{label[0]},{label[1]}"] = rows
    return json.dumps(out, indent=2, sort_keys=True)


def law_from_json(text: str, entry: CatalogEntry) -> GroupLawTable:
    data = json.loads(text)
    spec = entry.spec
    if data.get("step") != spec.step or tuple(data.get("dims", ())) != spec.dims:
        raise StructuralError("law JSON does not match the algebra's shape")
    polys = []
    for label in spec.labels:
        rows = data["law"].get(f"{label[0]},{label[1]}", [])
        terms: dict[Monomial, Fraction] = {}
        for row in rows:
            m = tuple(sorted(
                ((_LEFT if tag == "x" else _RIGHT, n, j), e)
                for (tag, n, j), e in (
                    ((v[0], v[1], v[2]), e) for v, e in row["monomial"]
                )
            ))
            terms[m] = Fraction(row["num"], row["den"])
        polys.append(SparsePolynomial(terms))
    return GroupLawTable(entry, tuple(polys))
