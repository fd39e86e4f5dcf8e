"""Independent product oracle through exact unipotent matrices.

Group elements are realized as unipotent matrices with Fraction entries;
products are plain matrix products and the exponential/logarithm series
terminate by nilpotency.  This path shares no code with the symbolic group
law, which is the point: the two must agree and are tested against each
other.

Catalog groups with a declared embedding map straight to elementary
matrices.  Any other validated algebra gets a faithful representation by
left multiplication on the weight-truncated enveloping algebra, built by
normal-ordering products of basis generators.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from .algebra import LieVector, scalar_layer
from .catalog import CatalogEntry
from .errors import LayerError, StructuralError

Matrix = tuple[tuple[Fraction, ...], ...]


def mat_identity(n: int) -> Matrix:
    return tuple(
        tuple(Fraction(1) if i == j else Fraction(0) for j in range(n))
        for i in range(n)
    )


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n = len(a)
    bt = tuple(zip(*b))
    return tuple(
        tuple(sum(x * y for x, y in zip(row, col)) for col in bt)
        for row in a
    )


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(c: Fraction, a: Matrix) -> Matrix:
    return tuple(tuple(c * x for x in row) for row in a)


def mat_is_zero(a: Matrix) -> bool:
    return all(all(x == 0 for x in row) for row in a)


def exp_nilpotent(m: Matrix) -> Matrix:
    """exp of a nilpotent matrix; the series must terminate within dim steps."""
    n = len(m)
    total = mat_identity(n)
    term = m
    k = 1
    while not mat_is_zero(term):
        if k > n:
            raise StructuralError("matrix is not nilpotent")
        total = mat_add(total, mat_scale(Fraction(1, _factorial(k)), term))
        term = mat_mul(term, m)
        k += 1
    return total


def log_unipotent(u: Matrix) -> Matrix:
    """log of a unipotent matrix; the series must terminate within dim steps."""
    n = len(u)
    l = mat_add(u, mat_scale(Fraction(-1), mat_identity(n)))
    total = tuple(tuple(Fraction(0) for _ in range(n)) for _ in range(n))
    term = l
    k = 1
    while not mat_is_zero(term):
        if k > n:
            raise StructuralError("matrix is not unipotent")
        sign = Fraction(1, k) if k % 2 == 1 else Fraction(-1, k)
        total = mat_add(total, mat_scale(sign, term))
        term = mat_mul(term, l)
        k += 1
    return total


@lru_cache(maxsize=None)
def _factorial(k: int) -> int:
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def _embed_elementary(entry: CatalogEntry, v: LieVector) -> Matrix:
    n = entry.matrix_dim
    rows = [[Fraction(0)] * n for _ in range(n)]
    for label, (r, c) in entry.matrix_embedding.items():
        rows[r][c] = Fraction(v[label])
    return tuple(tuple(row) for row in rows)


def _read_elementary(entry: CatalogEntry, m: Matrix) -> tuple[Fraction, ...]:
    spec = entry.spec
    coords = [Fraction(0)] * spec.total_dim
    positions = set()
    for label, (r, c) in entry.matrix_embedding.items():
        coords[spec.index(label)] = m[r][c]
        positions.add((r, c))
    for r, row in enumerate(m):
        for c, x in enumerate(row):
            if x and (r, c) not in positions:
                raise StructuralError(
                    f"log landed outside the embedded subalgebra at entry {(r, c)}"
                )
    return tuple(coords)


class RegularRepresentation:
    """Left multiplication on the enveloping algebra, truncated by weight.

    Basis: normal-ordered generator monomials of weight <= step, where a
    generator's weight is its level.  Products are straightened with the
    commutation rule, dropping anything beyond the weight cut-off; the
    resulting generator matrices are nilpotent and represent the algebra
    faithfully, because multiplying the unit recovers the element itself.
    """

    def __init__(self, entry: CatalogEntry):
        self.entry = entry
        spec = entry.spec
        self.gens = spec.labels
        self.weights = tuple(lbl[0] for lbl in self.gens)
        self.cutoff = spec.step
        monos: list[tuple] = []

        def enumerate_monos(t: int, weight: int, acc: list):
            if t == len(self.gens):
                monos.append(tuple(acc))
                return
            enumerate_monos(t + 1, weight, acc)
            w, e = self.weights[t], 1
            while weight + w * e <= self.cutoff:
                acc.append((t, e))
                enumerate_monos(t + 1, weight + w * e, acc)
                acc.pop()
                e += 1

        enumerate_monos(0, 0, [])
        monos.sort(key=lambda m: (sum(self.weights[g] * e for g, e in m), m))
        self.monos = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self._mult_cache: dict[tuple[int, tuple], dict] = {}
        self.matrices = [self._gen_matrix(t) for t in range(len(self.gens))]

    def _bracket_gens(self, t: int, u: int) -> dict[int, Fraction]:
        out = self.entry.constants.pair(self.gens[t], self.gens[u])
        idx = {lbl: i for i, lbl in enumerate(self.gens)}
        return {idx[lbl]: c for lbl, c in out.items() if c}

    def _mult_gen(self, t: int, mono: tuple) -> dict[tuple, Fraction]:
        """Normal-ordered X_t * mono, truncated by weight."""
        key = (t, mono)
        cached = self._mult_cache.get(key)
        if cached is not None:
            return cached
        w = self.weights[t] + sum(self.weights[g] * e for g, e in mono)
        if w > self.cutoff:
            result: dict[tuple, Fraction] = {}
        elif not mono or t <= mono[0][0]:
            bumped = dict(mono)
            bumped[t] = bumped.get(t, 0) + 1
            result = {tuple(sorted(bumped.items())): Fraction(1)}
        else:
            u = mono[0][0]
            rest = dict(mono)
            rest[u] -= 1
            if not rest[u]:
                del rest[u]
            rest = tuple(sorted(rest.items()))
            result = {}
            for m2, c2 in self._mult_gen(t, rest).items():
                bumped = dict(m2)
                bumped[u] = bumped.get(u, 0) + 1
                key2 = tuple(sorted(bumped.items()))
                if sum(self.weights[g] * e for g, e in key2) <= self.cutoff:
                    result[key2] = result.get(key2, Fraction(0)) + c2
            for v, cv in self._bracket_gens(t, u).items():
                for m2, c2 in self._mult_gen(v, rest).items():
                    result[m2] = result.get(m2, Fraction(0)) + cv * c2
            result = {m: c for m, c in result.items() if c}
        self._mult_cache[key] = result
        return result

    def _gen_matrix(self, t: int) -> Matrix:
        n = len(self.monos)
        cols = [self._mult_gen(t, m) for m in self.monos]
        return tuple(
            tuple(cols[j].get(self.monos[i], Fraction(0)) for j in range(n))
            for i in range(n)
        )

    def embed(self, v: LieVector) -> Matrix:
        n = len(self.monos)
        rows = [[Fraction(0)] * n for _ in range(n)]
        for t in range(len(self.gens)):
            c = Fraction(v.coords[t])
            if c:
                m = self.matrices[t]
                for i in range(n):
                    row = m[i]
                    for j in range(n):
                        if row[j]:
                            rows[i][j] += c * row[j]
        return tuple(tuple(r) for r in rows)

    def read_back(self, m: Matrix) -> tuple[Fraction, ...]:
        unit = self.index[()]
        coords = [Fraction(0)] * len(self.gens)
        gen_rows = {}
        for t in range(len(self.gens)):
            gen_rows[self.index[((t, 1),)]] = t
        for i in range(len(self.monos)):
            x = m[i][unit]
            if i in gen_rows:
                coords[gen_rows[i]] = x
            elif x and i != unit:
                raise StructuralError(
                    "log landed outside the represented algebra"
                )
        if m[unit][unit]:
            raise StructuralError("log has a unit component")
        return tuple(coords)


_REG_CACHE: dict[str, RegularRepresentation] = {}


def _regular(entry: CatalogEntry) -> RegularRepresentation:
    name = entry.spec.name
    rep = _REG_CACHE.get(name)
    if rep is None or rep.entry is not entry:
        rep = RegularRepresentation(entry)
        _REG_CACHE[name] = rep
    return rep


def matrix_oracle_product(entry: CatalogEntry, xs) -> LieVector:
    """Product of exp(x_1)...exp(x_N) computed purely with matrices.

    Exact layer only; raises LayerError on float inputs.
    """
    xs = list(xs)
    if not xs:
        raise StructuralError("empty product")
    for x in xs:
        if scalar_layer(x.coords) != "exact":
            raise LayerError("matrix oracle works in the exact layer only")
    if entry.matrix_embedding is not None:
        total = mat_identity(entry.matrix_dim)
        for x in xs:
            total = mat_mul(total, exp_nilpotent(_embed_elementary(entry, x)))
        coords = _read_elementary(entry, log_unipotent(total))
    else:
        rep = _regular(entry)
        total = mat_identity(len(rep.monos))
        for x in xs:
            total = mat_mul(total, exp_nilpotent(rep.embed(x)))
        coords = rep.read_back(log_unipotent(total))
    return LieVector(entry.spec, coords)
