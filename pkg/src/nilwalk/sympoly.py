"""Sparse polynomials over sequence-indexed coordinates, exact rationals only.

A variable is a triple ``(k, n, j)``: coordinate ``(n, j)`` of the k-th
element of a sequence (k is 1-based).  A monomial is a sorted tuple of
``(variable, exponent)`` pairs; a polynomial maps monomials to Fraction
coefficients.  The *homogeneous degree* of a monomial weights each variable
by its level n; the *type class* of a monomial forgets which sequence
indices it uses but keeps their relative order.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

Var = tuple[int, int, int]          # (seq index, level, position)
Monomial = tuple[tuple[Var, int], ...]

ONE: Monomial = ()


def mono(*pairs: tuple[Var, int]) -> Monomial:
    """Build a canonical monomial from (variable, exponent) pairs."""
    acc: dict[Var, int] = {}
    for v, e in pairs:
        if e < 0:
            raise ValueError("negative exponent")
        if e:
            acc[v] = acc.get(v, 0) + e
    return tuple(sorted(acc.items()))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for v, e in b:
        acc[v] = acc.get(v, 0) + e
    return tuple(sorted(acc.items()))


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def mono_hom_degree(m: Monomial) -> int:
    return sum(v[1] * e for v, e in m)


def mono_seq_indices(m: Monomial) -> tuple[int, ...]:
    return tuple(sorted({v[0] for v, _ in m}))


def mono_type_class(m: Monomial) -> Monomial:
    """Relabel sequence indices to 1..r preserving order."""
    rank = {k: i + 1 for i, k in enumerate(mono_seq_indices(m))}
    return tuple(sorted((((rank[v[0]], v[1], v[2]), e) for v, e in m)))


def mono_relabel(m: Monomial, perm) -> Monomial:
    """Apply a map (callable or dict) to every sequence index."""
    get = perm.__getitem__ if isinstance(perm, dict) else perm
    return tuple(sorted((((get(v[0]), v[1], v[2]), e) for v, e in m)))


def mono_eval(m: Monomial, value_of) -> Fraction:
    out = 1
    for v, e in m:
        out *= value_of(v) ** e
    return out


class SparsePolynomial:
    """Mutable sparse polynomial with Fraction coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[Monomial, Fraction] | None = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c}

    @staticmethod
    def zero() -> "SparsePolynomial":
        return SparsePolynomial()

    @staticmethod
    def const(c) -> "SparsePolynomial":
        return SparsePolynomial({ONE: Fraction(c)})

    @staticmethod
    def variable(v: Var) -> "SparsePolynomial":
        return SparsePolynomial({((v, 1),): Fraction(1)})

    def copy(self) -> "SparsePolynomial":
        p = SparsePolynomial.__new__(SparsePolynomial)
        p.terms = dict(self.terms)
        return p

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return isinstance(other, SparsePolynomial) and self.terms == other.terms

    def __len__(self) -> int:
        return len(self.terms)

    def add_scaled(self, other: "SparsePolynomial", c: Fraction) -> "SparsePolynomial":
        """In-place self += c * other; returns self."""
        if c:
            t = self.terms
            items = other.terms.items()
            if other.terms is t:
                items = list(items)
            for m, co in items:
                new = t.get(m, 0) + c * co
                if new:
                    t[m] = new
                else:
                    t.pop(m, None)
        return self

    def __add__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        return self.copy().add_scaled(other, Fraction(1))

    def __sub__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        return self.copy().add_scaled(other, Fraction(-1))

    def __neg__(self) -> "SparsePolynomial":
        return SparsePolynomial({m: -c for m, c in self.terms.items()})

    def scale(self, c) -> "SparsePolynomial":
        c = Fraction(c)
        return SparsePolynomial({m: c * co for m, co in self.terms.items()}) if c else SparsePolynomial()

    def __mul__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                new = out.get(m, 0) + c1 * c2
                if new:
                    out[m] = new
                else:
                    out.pop(m, None)
        p = SparsePolynomial.__new__(SparsePolynomial)
        p.terms = out
        return p

    def power(self, e: int) -> "SparsePolynomial":
        if e < 0:
            raise ValueError("negative exponent")
        out = SparsePolynomial.const(1)
        base = self
        while e:
            if e & 1:
                out = out * base
            e >>= 1
            if e:
                base = base * base
        return out

    def max_hom_degree(self) -> int:
        return max((mono_hom_degree(m) for m in self.terms), default=0)

    def l1_norm(self) -> Fraction:
        return sum((abs(c) for c in self.terms.values()), Fraction(0))

    def relabel(self, perm) -> "SparsePolynomial":
        out: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            key = mono_relabel(m, perm)
            out[key] = out.get(key, 0) + c
        return SparsePolynomial(out)

    def evaluate(self, value_of):
        """Exact evaluation; value_of maps a variable to a scalar."""
        total = Fraction(0)
        for m, c in self.terms.items():
            total += c * mono_eval(m, value_of)
        return total

    def evaluate_float(self, value_of) -> float:
        total = 0.0
        comp = 0.0
        for m, c in self.terms.items():
            term = float(c)
            for v, e in m:
                term *= value_of(v) ** e
            # Neumaier compensation
            s = total + term
            if abs(total) >= abs(term):
                comp += (total - s) + term
            else:
                comp += (term - s) + total
            total = s
        return total + comp

    def substitute(self, image_of) -> "SparsePolynomial":
        """Polynomial-valued substitution; image_of maps a variable to a polynomial."""
        out = SparsePolynomial()
        powers: dict[tuple[Var, int], SparsePolynomial] = {}
        for m, c in self.terms.items():
            term = SparsePolynomial.const(c)
            for v, e in m:
                key = (v, e)
                if key not in powers:
                    powers[key] = image_of(v).power(e)
                term = term * powers[key]
            out.add_scaled(term, Fraction(1))
        return out

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: (mono_hom_degree(kv[0]), kv[0]))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for m, c in self.sorted_terms():
            vs = "*".join(
                f"x{v[0]}^({v[1]},{v[2]})" + (f"**{e}" if e > 1 else "")
                for v, e in m
            ) or "1"
            bits.append(f"{c}*{vs}")
        return " + ".join(bits)


class UStatisticSpec:
    """Ordered blocks of coordinate exponents defining a symmetric statistic.

    The statistic sums, over strictly increasing index tuples l_1 < ... < l_r,
    the product over blocks of the block's coordinate powers evaluated at the
    corresponding sequence element.
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        cleaned = []
        for block in blocks:
            block = tuple(sorted((tuple(lbl), int(e)) for lbl, e in block if e))
            if not block:
                raise ValueError("empty block in statistic spec")
            cleaned.append(block)
        if not cleaned:
            raise ValueError("statistic needs at least one block")
        self.blocks = tuple(cleaned)

    @property
    def order(self) -> int:
        return len(self.blocks)

    @property
    def hom_degree(self) -> int:
        return sum(lbl[0] * e for block in self.blocks for lbl, e in block)

    def initial_monomial(self) -> Monomial:
        return mono(*(
            ((k, lbl[0], lbl[1]), e)
            for k, block in enumerate(self.blocks, start=1)
            for lbl, e in block
        ))

    @staticmethod
    def from_type_class(tc: Monomial) -> "UStatisticSpec":
        by_rank: dict[int, list] = {}
        for (k, n, j), e in tc:
            by_rank.setdefault(k, []).append(((n, j), e))
        ranks = sorted(by_rank)
        if ranks != list(range(1, len(ranks) + 1)):
            raise ValueError(f"type class ranks not contiguous: {ranks}")
        return UStatisticSpec([by_rank[r] for r in ranks])

    def expand(self, n_elements: int) -> SparsePolynomial:
        """Written-out polynomial at ambient sequence length n_elements."""
        from itertools import combinations

        out: dict[Monomial, Fraction] = {}
        one = Fraction(1)
        for idx in combinations(range(1, n_elements + 1), self.order):
            m = mono(*(
                ((idx[b], lbl[0], lbl[1]), e)
                for b, block in enumerate(self.blocks)
                for lbl, e in block
            ))
            out[m] = one
        return SparsePolynomial(out)

    def instance_count(self, n_elements: int) -> int:
        return comb(n_elements, self.order)

    def __eq__(self, other) -> bool:
        return isinstance(other, UStatisticSpec) and self.blocks == other.blocks

    def __hash__(self) -> int:
        return hash(self.blocks)

    def __repr__(self) -> str:
        return f"UStatisticSpec({list(self.blocks)!r})"
