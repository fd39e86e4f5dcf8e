"""Symbolic product expansions and the statistics they decompose into.

``expand_product`` writes the coordinates of a length-N product of symbolic
group elements as exact polynomials in the increment coordinates; variable
``(k, n, j)`` is coordinate ``(n, j)`` of the k-th increment.  Each level's
coordinate splits into the plain sum of that coordinate over the sequence
plus a correction polynomial; the correction is what decomposes into
order-statistics over increasing index tuples.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .algebra import LieVector, scalar_layer
from .catalog import CatalogEntry
from .errors import InvarianceError, ResourceError, StructuralError
from .grouplaw import GroupLawTable
from .sympoly import (
    Monomial,
    SparsePolynomial,
    UStatisticSpec,
    mono_hom_degree,
    mono_type_class,
)


@dataclass(frozen=True)
class ProductExpansion:
    entry: CatalogEntry
    n_elements: int
    polys: tuple[SparsePolynomial, ...]

    def poly(self, label) -> SparsePolynomial:
        return self.polys[self.entry.spec.index(tuple(label))]

    def correction(self, label) -> SparsePolynomial:
        """Coordinate minus the plain sum of the same coordinate."""
        label = tuple(label)
        n, j = label
        out = self.poly(label).copy()
        one = Fraction(1)
        for k in range(1, self.n_elements + 1):
            m: Monomial = (((k, n, j), 1),)
            c = out.terms.pop(m, None)
            if c is None or c != one:
                raise StructuralError(
                    f"linear part of coordinate {label} is not the plain sum"
                )
        return out


_EXPANSIONS: dict[str, list[ProductExpansion]] = {}


def expand_product(law: GroupLawTable, n_elements: int,
                   max_monomials: int = 10 ** 6) -> ProductExpansion:
    """Coordinates of the product of n symbolic elements, exactly.

    Builds incrementally from shorter products (cached per group).  Raises
    ResourceError when the total stored monomial count would exceed the
    budget.
    """
    if n_elements < 1:
        raise StructuralError("need at least one element")
    spec = law.spec
    chain = _EXPANSIONS.setdefault(spec.name, [])
    if chain and chain[0].entry is not law.entry:
        chain.clear()
    if not chain:
        first = tuple(
            SparsePolynomial.variable((1, n, j)) for (n, j) in spec.labels
        )
        chain.append(ProductExpansion(law.entry, 1, first))
    while len(chain) < n_elements:
        prev = chain[-1]
        t = prev.n_elements + 1
        fresh = {
            (n, j): SparsePolynomial.variable((t, n, j)) for (n, j) in spec.labels
        }

        def image_of(v):
            side, n, j = v
            if side == 1:
                return prev.polys[spec.index((n, j))]
            return fresh[(n, j)]

        polys = tuple(p.substitute(image_of) for p in law.polys)
        total = sum(len(p) for p in polys)
        if total > max_monomials:
            raise ResourceError(
                f"product expansion at length {t} needs {total} monomials; "
                f"budget is {max_monomials}"
            )
        chain.append(ProductExpansion(law.entry, t, polys))
    return chain[n_elements - 1]


# ---------------------------------------------------------------------------
# the three structural checks on expansions

@dataclass
class LemmaCheck:
    name: str
    status: str          # "pass" | "fail"
    witness: dict | None = None


@dataclass
class LemmaReport:
    checks: list[LemmaCheck]

    @property
    def ok(self) -> bool:
        return all(c.status == "pass" for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [
                {"name": c.name, "status": c.status, "witness": jsonable(c.witness)}
                for c in self.checks
            ],
        }


def jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def check_product_lemma(smaller: ProductExpansion, larger: ProductExpansion) -> LemmaReport:
    """Degree bound, coefficient stability, and index-shape invariance.

    ``smaller`` and ``larger`` must be expansions of the same group with
    smaller.n_elements < larger.n_elements.
    """
    if smaller.entry is not larger.entry:
        raise StructuralError("expansions from different groups")
    if not smaller.n_elements < larger.n_elements:
        raise StructuralError("first expansion must be the shorter one")
    checks = []

    witness = None
    for label in smaller.entry.spec.labels:
        for m in smaller.poly(label).terms:
            if mono_hom_degree(m) > label[0]:
                witness = {"label": label, "monomial": m}
                break
        if witness:
            break
    checks.append(LemmaCheck(
        "degree-bound", "fail" if witness else "pass", witness))

    witness = None
    for label in smaller.entry.spec.labels:
        big = larger.correction(label).terms
        for m, c in smaller.correction(label).terms.items():
            if big.get(m) != c:
                witness = {
                    "label": label, "monomial": m,
                    "coefficient_small": c, "coefficient_large": big.get(m, 0),
                }
                break
        if witness:
            break
    checks.append(LemmaCheck(
        "stability", "fail" if witness else "pass", witness))

    witness = None
    for exp in (smaller, larger):
        for label in exp.entry.spec.labels:
            try:
                u_decompose(exp.correction(label), exp.n_elements)
            except InvarianceError as e:
                witness = {"label": label, "n_elements": exp.n_elements,
                           "detail": str(e)}
                break
        if witness:
            break
    checks.append(LemmaCheck(
        "invariance", "fail" if witness else "pass", witness))

    return LemmaReport(checks)


# ---------------------------------------------------------------------------
# decomposition into order statistics

def u_decompose(poly: SparsePolynomial, n_elements: int) -> list[tuple[UStatisticSpec, Fraction]]:
    """Write a polynomial as a combination of increasing-index statistics.

    Every monomial with the same index shape must occur, over all increasing
    index choices in [1, n_elements], with one shared coefficient; otherwise
    InvarianceError names the offending shape.
    """
    groups: dict[Monomial, dict[Monomial, Fraction]] = {}
    for m, c in poly.terms.items():
        if not m:
            raise InvarianceError("constant term cannot be an index statistic")
        groups.setdefault(mono_type_class(m), {})[m] = c
    out = []
    for tc, instances in sorted(groups.items()):
        spec_u = UStatisticSpec.from_type_class(tc)
        coeffs = set(instances.values())
        expected = comb(n_elements, spec_u.order)
        if len(coeffs) > 1 or len(instances) != expected:
            raise InvarianceError(
                f"index shape {tc} has {len(instances)} of {expected} instances "
                f"with coefficients {sorted(coeffs)}"
            )
        out.append((spec_u, coeffs.pop()))
    return out


def u_recompose(parts, n_elements: int) -> SparsePolynomial:
    """Expand a decomposition back out; inverse of u_decompose."""
    out = SparsePolynomial()
    for spec_u, c in parts:
        out.add_scaled(spec_u.expand(n_elements), c)
    return out


def decomposition_l1(parts) -> Fraction:
    return sum((abs(c) for _, c in parts), Fraction(0))


# ---------------------------------------------------------------------------
# evaluation

def u_evaluate(spec_u: UStatisticSpec, xs) -> Fraction | float:
    """Evaluate the statistic on a sequence of vectors.

    Exact layer returns a Fraction; float layer uses compensated
    accumulation per partial sum.
    """
    xs = list(xs)
    if not xs:
        raise StructuralError("empty sequence")
    spec = xs[0].algebra
    cols = [
        [(spec.index(lbl), e) for lbl, e in block]
        for block in spec_u.blocks
    ]
    r = spec_u.order
    layer = scalar_layer(xs[0].coords)
    if layer == "exact":
        dp = [Fraction(1)] + [Fraction(0)] * r
        for x in xs:
            vals = [_block_value(x.coords, block) for block in cols]
            for b in range(r, 0, -1):
                dp[b] += dp[b - 1] * vals[b - 1]
        return dp[r]
    sums = [1.0] + [0.0] * r
    comps = [0.0] * (r + 1)
    for x in xs:
        vals = [float(_block_value(x.coords, block)) for block in cols]
        for b in range(r, 0, -1):
            term = (sums[b - 1] + comps[b - 1]) * vals[b - 1]
            s = sums[b] + term
            if abs(sums[b]) >= abs(term):
                comps[b] += (sums[b] - s) + term
            else:
                comps[b] += (term - s) + sums[b]
            sums[b] = s
    return sums[r] + comps[r]


def _block_value(coords, block):
    out = 1
    for idx, e in block:
        out *= coords[idx] ** e
    return out


def u_evaluate_batch(spec_u: UStatisticSpec, arr: np.ndarray, spec) -> np.ndarray:
    """Vectorized evaluation on a batch: arr has shape (samples, length, dim)."""
    s, n, _ = arr.shape
    r = spec_u.order
    dp = [np.ones(s)] + [np.zeros(s) for _ in range(r)]
    cols = [
        [(spec.index(tuple(lbl)), e) for lbl, e in block]
        for block in spec_u.blocks
    ]
    for l in range(n):
        vals = []
        for block in cols:
            v = np.ones(s)
            for idx, e in block:
                col = arr[:, l, idx]
                v = v * (col ** e if e > 1 else col)
            vals.append(v)
        for b in range(r, 0, -1):
            dp[b] = dp[b] + dp[b - 1] * vals[b - 1]
    return dp[r]
