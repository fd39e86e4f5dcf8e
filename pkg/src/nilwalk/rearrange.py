"""Block rearrangements of increment sequences and their alternating sums.

A window of k*n*W consecutive sequence positions is split into W segments
of n blocks of length k.  Per segment, a row of n-1 bits fixes a nested
arrangement of its blocks: bit j says whether block j+1 comes before or
after blocks 1..j as a group.  Bit rows compose by XOR, and the bit-flip
generators realize that composition on arrangements, which is the sense in
which the rows act.

The payoff is the alternating sum over hybrid bit choices: it cancels
everything below a target level and turns the window into per-segment
block sums, which is verified here symbolically, exactly.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct

import numpy as np

from .algebra import LieVector, zero_vector
from .catalog import CatalogEntry
from .errors import StructuralError
from .grouplaw import GroupLawTable, group_law, inverse, multiply
from .sympoly import SparsePolynomial, mono_hom_degree
from .walkpoly import ProductExpansion, expand_product

Bits = tuple[int, ...]


@dataclass(frozen=True)
class ActionSpec:
    """Window geometry: W segments of n blocks of length k, at an offset."""

    level: int              # n: blocks per segment
    block_len: int          # k
    segments: int           # W
    offset: int             # elements before the window
    ambient: int            # total sequence length

    def __post_init__(self):
        if min(self.level, self.block_len, self.segments) < 1 or self.offset < 0:
            raise StructuralError("window parameters must be positive (offset >= 0)")
        if self.offset + self.window_len > self.ambient:
            raise StructuralError(
                f"window of {self.window_len} at offset {self.offset} "
                f"does not fit in {self.ambient} elements"
            )

    @property
    def window_len(self) -> int:
        return self.block_len * self.level * self.segments

    def elements(self) -> tuple[Bits, ...]:
        """All bit-row stacks for this window."""
        rows = list(iproduct((0, 1), repeat=self.level - 1))
        return tuple(iproduct(rows, repeat=self.segments))


def arrangement(row: Bits) -> tuple[int, ...]:
    """Nested block order for one bit row (blocks numbered from 1)."""
    order = [1]
    for j, bit in enumerate(row, start=1):
        order = [j + 1] + order if bit else order + [j + 1]
    return tuple(order)


def toggle_block(order, j: int) -> tuple[int, ...]:
    """Flip the side of block j+1 relative to the group of blocks 1..j."""
    order = list(order)
    moved = j + 1
    pos = order.index(moved)
    rest = order[:pos] + order[pos + 1:]
    group = [i for i, b in enumerate(rest) if b <= j]
    if group != list(range(group[0], group[0] + j)):
        raise StructuralError("blocks 1..j are not contiguous; not a nested order")
    insert_at = group[0] if pos > group[-1] else group[-1] + 1
    return tuple(rest[:insert_at] + [moved] + rest[insert_at:])


def compose_rows(a: Bits, b: Bits) -> Bits:
    return tuple(x ^ y for x, y in zip(a, b))


def position_sources(spec: ActionSpec, tau) -> tuple[int, ...]:
    """For each 1-based output position, the source position it reads from."""
    src = list(range(1, spec.ambient + 1))
    k, n = spec.block_len, spec.level
    for w, row in enumerate(tau):
        base = spec.offset + w * k * n
        arr = arrangement(row)
        for slot, block in enumerate(arr):
            for u in range(k):
                src[base + slot * k + u] = base + (block - 1) * k + u + 1
    return tuple(src)


def act(spec: ActionSpec, tau, xs: list) -> list:
    """Rearranged copy of xs (read as standard order, bit state zero)."""
    if len(xs) != spec.ambient:
        raise StructuralError("sequence length does not match the window spec")
    return [xs[s - 1] for s in position_sources(spec, tau)]


def hybrid(tau0, tau1, selector: Bits):
    """Mix two bit stacks columnwise: column j comes from tau1 iff bit j set."""
    return tuple(
        tuple(r1[j] if selector[j] else r0[j] for j in range(len(selector)))
        for r0, r1 in zip(tau0, tau1)
    )


def block_sums(spec: ActionSpec, xs) -> list[list[LieVector]]:
    """Plain per-block coordinate sums, one list of n per segment."""
    k, n = spec.block_len, spec.level
    out = []
    for w in range(spec.segments):
        base = spec.offset + w * k * n
        seg = []
        for b in range(n):
            total = xs[base + b * k]
            for u in range(1, k):
                total = total + xs[base + b * k + u]
            seg.append(total)
        out.append(seg)
    return out


# ---------------------------------------------------------------------------
# alternating sums, numeric and symbolic

def alternating_sum(spec: ActionSpec, law: GroupLawTable, tau0, tau1, xs) -> LieVector:
    """Sum over hybrid selectors of signed full products of rearranged xs."""
    total = zero_vector(law.spec, layer=xs[0].layer if xs else "exact")
    for sel in iproduct((0, 1), repeat=spec.level - 1):
        sign = -1 if sum(sel) % 2 else 1
        ys = act(spec, hybrid(tau0, tau1, sel), xs)
        prod = ys[0]
        for y in ys[1:]:
            prod = multiply(law, prod, y)
        total = total + (prod if sign > 0 else -prod)
    return total


def symbolic_alternating_sum(spec: ActionSpec, expansion: ProductExpansion,
                             tau0, tau1) -> list[SparsePolynomial]:
    """Same quantity with symbolic increments; one polynomial per label."""
    if expansion.n_elements != spec.ambient:
        raise StructuralError("expansion length does not match the window spec")
    total = [SparsePolynomial() for _ in expansion.polys]
    for sel in iproduct((0, 1), repeat=spec.level - 1):
        sign = Fraction(-1 if sum(sel) % 2 else 1)
        perm = dict(enumerate(position_sources(spec, hybrid(tau0, tau1, sel)), start=1))
        for m, poly in enumerate(expansion.polys):
            total[m].add_scaled(poly.relabel(perm), sign)
    return total


def _substitute_sequence(expansion: ProductExpansion, images) -> list[SparsePolynomial]:
    """Evaluate an expansion on polynomial-valued elements.

    images[i][m] is the polynomial for coordinate m of the (i+1)-st element.
    """
    spec = expansion.entry.spec

    def image_of(v):
        pos, n, j = v
        return images[pos - 1][spec.index((n, j))]

    return [p.substitute(image_of) for p in expansion.polys]


# ---------------------------------------------------------------------------
# symbolic verification of the window identities

def verify_action_identities(entry: CatalogEntry, level: int, block_len: int,
                             segments: int, offset: int = 1, trailing: int = 1):
    """Exact symbolic checks of the window cancellation identities.

    Returns a LemmaReport with four checks:

    * ``vanishing``: the alternating sum has no component below the target
      level, for every pair of bit stacks.
    * ``segment-sums``: at the target level it equals the sum over segments
      of the alternating sum of that segment's block sums.
    * ``single-segment``: one segment's term vanishes unless the two bit
      rows differ in every column, and otherwise carries the first row's
      sign times the full signed sum over all rows.
    * ``multilinear``: the full signed sum over rows is a nonzero polynomial
      that is multilinear in the level-1 coordinates, one factor per block.
    """
    from .walkpoly import LemmaCheck, LemmaReport

    if level > entry.spec.step:
        raise StructuralError("target level exceeds the group's step")
    law = group_law(entry)
    ambient = offset + block_len * level * segments + trailing
    spec = ActionSpec(level, block_len, segments, offset, ambient)
    expansion = expand_product(law, ambient)
    lvl_slice = entry.spec.level_slice(level)
    labels = entry.spec.labels
    checks = []

    # the full signed sum over single rows, on n fresh symbolic elements
    base_n = expand_product(law, level)
    row_spec = ActionSpec(level, 1, 1, 0, level)
    full_signed = [SparsePolynomial() for _ in labels]
    for row in iproduct((0, 1), repeat=level - 1):
        sign = Fraction(-1 if sum(row) % 2 else 1)
        perm = dict(enumerate(position_sources(row_spec, (row,)), start=1))
        for m in range(len(labels)):
            full_signed[m].add_scaled(base_n.polys[m].relabel(perm), sign)

    # per-segment right-hand sides, cached per (segment, row0, row1)
    def segment_term(w: int, row0: Bits, row1: Bits) -> list[SparsePolynomial]:
        base = offset + w * block_len * level
        omegas = []
        for b in range(level):
            vec = []
            for n, j in labels:
                p = SparsePolynomial()
                for u in range(1, block_len + 1):
                    pos = base + b * block_len + u
                    p.add_scaled(SparsePolynomial.variable((pos, n, j)), Fraction(1))
                vec.append(p)
            omegas.append(vec)
        total = [SparsePolynomial() for _ in labels]
        for sel in iproduct((0, 1), repeat=level - 1):
            sign = Fraction(-1 if sum(sel) % 2 else 1)
            row = tuple(row1[j] if sel[j] else row0[j] for j in range(level - 1))
            arr = arrangement(row)
            ordered = [omegas[b - 1] for b in arr]
            prod = _substitute_sequence(base_n, ordered)
            for m in range(len(labels)):
                total[m].add_scaled(prod[m], sign)
        return total

    rows = list(iproduct((0, 1), repeat=level - 1))
    seg_cache = {
        (w, r0, r1): segment_term(w, r0, r1)
        for w in range(segments) for r0 in rows for r1 in rows
    }

    vanish_witness = None
    sums_witness = None
    all_elements = spec.elements()
    for tau0 in all_elements:
        for tau1 in all_elements:
            got = symbolic_alternating_sum(spec, expansion, tau0, tau1)
            if vanish_witness is None:
                for m, lbl in enumerate(labels):
                    if lbl[0] < level and not got[m].is_zero():
                        vanish_witness = {"tau0": tau0, "tau1": tau1, "label": lbl}
                        break
            if sums_witness is None:
                want = [SparsePolynomial() for _ in labels]
                for w in range(segments):
                    term = seg_cache[(w, tau0[w], tau1[w])]
                    for m in range(len(labels)):
                        want[m].add_scaled(term[m], Fraction(1))
                for m in range(lvl_slice.start, lvl_slice.stop):
                    if got[m] != want[m]:
                        sums_witness = {"tau0": tau0, "tau1": tau1,
                                        "label": labels[m]}
                        break
            if vanish_witness and sums_witness:
                break
        if vanish_witness and sums_witness:
            break
    checks.append(LemmaCheck("vanishing", "fail" if vanish_witness else "pass",
                             vanish_witness))
    checks.append(LemmaCheck("segment-sums", "fail" if sums_witness else "pass",
                             sums_witness))

    single_witness = None
    single_spec = ActionSpec(level, 1, 1, 0, level)
    for row0 in rows:
        for row1 in rows:
            got = [SparsePolynomial() for _ in labels]
            for sel in iproduct((0, 1), repeat=level - 1):
                sign = Fraction(-1 if sum(sel) % 2 else 1)
                row = tuple(row1[j] if sel[j] else row0[j] for j in range(level - 1))
                perm = dict(enumerate(position_sources(single_spec, (row,)), start=1))
                for m in range(len(labels)):
                    got[m].add_scaled(base_n.polys[m].relabel(perm), sign)
            if all(r0 != r1 for r0, r1 in zip(row0, row1)):
                sign = Fraction(-1 if sum(row0) % 2 else 1)
                ok = all(
                    got[m] == full_signed[m].scale(sign)
                    for m in range(lvl_slice.start, lvl_slice.stop)
                )
            else:
                ok = all(got[m].is_zero() for m in range(lvl_slice.start, lvl_slice.stop))
            if not ok and single_witness is None:
                single_witness = {"row0": row0, "row1": row1}
    checks.append(LemmaCheck("single-segment", "fail" if single_witness else "pass",
                             single_witness))

    multi_witness = None
    nonzero = any(not full_signed[m].is_zero()
                  for m in range(lvl_slice.start, lvl_slice.stop))
    if not nonzero:
        multi_witness = {"reason": "signed sum vanishes identically"}
    else:
        for m in range(lvl_slice.start, lvl_slice.stop):
            for mon in full_signed[m].terms:
                seq = sorted(v[0] for v, _ in mon)
                degrees_ok = all(e == 1 and v[1] == 1 for v, e in mon)
                if seq != list(range(1, level + 1)) or not degrees_ok:
                    multi_witness = {"label": labels[m], "monomial": mon}
                    break
            if multi_witness:
                break
    checks.append(LemmaCheck("multilinear", "fail" if multi_witness else "pass",
                             multi_witness))
    return LemmaReport(checks)


# ---------------------------------------------------------------------------
# iterated group commutators

def iterated_commutator(law: GroupLawTable, gs, convention: str = "aba-b-"):
    """[[...[g1, g2], g3], ...]; convention 'aba-b-' means [a,b]=a b a^-1 b^-1."""
    gs = list(gs)
    if not gs:
        raise StructuralError("need at least one element")
    out = gs[0]
    for g in gs[1:]:
        if convention == "aba-b-":
            parts = [out, g, inverse(out), inverse(g)]
        elif convention == "a-b-ab":
            parts = [inverse(out), inverse(g), out, g]
        else:
            raise StructuralError(f"unknown commutator convention {convention!r}")
        acc = parts[0]
        for p in parts[1:]:
            acc = multiply(law, acc, p)
        out = acc
    return out


def commutator_matches_alternating(entry: CatalogEntry, level: int) -> dict:
    """Empirically resolve how the signed sum relates to the group commutator.

    Compares, symbolically, the level-n part of the iterated commutator of n
    elements against the full signed sum over rearrangement rows, for both
    commutator conventions.  Returns {"convention": ..., "sign": ...} for the
    matching combination.
    """
    law = group_law(entry)
    labels = entry.spec.labels
    base_n = expand_product(law, level)
    row_spec = ActionSpec(level, 1, 1, 0, level)
    signed = [SparsePolynomial() for _ in labels]
    for row in iproduct((0, 1), repeat=level - 1):
        sign = Fraction(-1 if sum(row) % 2 else 1)
        perm = dict(enumerate(position_sources(row_spec, (row,)), start=1))
        for m in range(len(labels)):
            signed[m].add_scaled(base_n.polys[m].relabel(perm), sign)

    elems = [
        [SparsePolynomial.variable((i, n, j)) for (n, j) in labels]
        for i in range(1, level + 1)
    ]

    def poly_mult(u, v):
        spec = entry.spec

        def image_of(var):
            side, n, j = var
            vec = u if side == 1 else v
            return vec[spec.index((n, j))]

        return [p.substitute(image_of) for p in law.polys]

    def poly_commutator(convention):
        out = elems[0]
        for g in elems[1:]:
            ginv = [-p for p in g]
            outinv = [-p for p in out]
            if convention == "aba-b-":
                parts = [out, g, outinv, ginv]
            else:
                parts = [outinv, ginv, out, g]
            acc = parts[0]
            for p in parts[1:]:
                acc = poly_mult(acc, p)
            out = acc
        return out

    sl = entry.spec.level_slice(level)
    for convention in ("aba-b-", "a-b-ab"):
        comm = poly_commutator(convention)
        for sign in (1, -1):
            if all(comm[m] == signed[m].scale(sign) for m in range(sl.start, sl.stop)):
                return {"convention": convention, "sign": sign}
    return {"convention": None, "sign": None}


# ---------------------------------------------------------------------------
# the commutator measure and the window bound

def sample_commutator_measure(entry: CatalogEntry, measure, level: int,
                              block_len: int, count: int, seed) -> np.ndarray:
    """Draws of the signed-sum value on block sums of fresh increments.

    Returns an array of shape (count, d_level) with the target-level
    coordinates.  Increments are drawn from ``measure``; each of the n
    blocks sums ``block_len`` of them.
    """
    from .measures import sample_coords
    from .rng import chunk_generators

    law_np = _compiled(entry)
    spec = entry.spec
    sl = spec.level_slice(level)
    out = np.empty((count, sl.stop - sl.start))
    pos = 0
    for g, n_chunk in chunk_generators(seed, "commutator-measure", count):
        draws = sample_coords(measure, g, n_chunk * level * block_len)
        draws = draws.reshape(n_chunk, level, block_len, spec.total_dim)
        omegas = draws.sum(axis=2)
        total = np.zeros((n_chunk, sl.stop - sl.start))
        for row in iproduct((0, 1), repeat=level - 1):
            sign = -1.0 if sum(row) % 2 else 1.0
            arr = arrangement(row)
            prod = omegas[:, arr[0] - 1, :]
            for b in arr[1:]:
                prod = law_np(prod, omegas[:, b - 1, :])
            total += sign * prod[:, sl.start:sl.stop]
        out[pos:pos + n_chunk] = total
        pos += n_chunk
    return out


def commutator_char_fn(entry: CatalogEntry, measure, level: int, block_len: int,
                       xi_level: np.ndarray, count: int, seed):
    """Monte Carlo estimate of the commutator measure's characteristic function."""
    samples = sample_commutator_measure(entry, measure, level, block_len, count, seed)
    phases = np.exp(-2j * np.pi * (samples @ np.asarray(xi_level, dtype=float)))
    mean = complex(phases.mean())
    se = float(np.sqrt(
        (phases.real.var(ddof=1) + phases.imag.var(ddof=1)) / len(phases)))
    return mean, se


def _compiled(entry: CatalogEntry):
    from .grouplaw import compiled_law
    return compiled_law(entry)


def exact_commutator_char(entry: CatalogEntry, measure, level: int,
                          block_len: int, xi, budget: int = 200_000) -> complex:
    """Characteristic function of the signed-sum value, by atom enumeration."""
    from .measures import Discrete

    if not isinstance(measure, Discrete):
        raise StructuralError("exact enumeration needs a discrete measure")
    n_draws = level * block_len
    if len(measure.atoms) ** n_draws > budget:
        raise StructuralError("atom enumeration exceeds the budget")
    law = group_law(entry)
    spec = entry.spec
    xi = [float(v) for v in xi]
    vectors = [LieVector(spec, atom) for atom in measure.atoms]
    rows = list(iproduct((0, 1), repeat=level - 1))
    arrs = {row: arrangement(row) for row in rows}
    total = 0j
    for combo in iproduct(range(len(vectors)), repeat=n_draws):
        w = Fraction(1)
        for i in combo:
            w *= measure.weights[i]
        omegas = []
        for b in range(level):
            v = vectors[combo[b * block_len]]
            for u in range(1, block_len):
                v = v + vectors[combo[b * block_len + u]]
            omegas.append(v)
        lam = zero_vector(spec)
        for row in rows:
            sign = -1 if sum(row) % 2 else 1
            ordered = [omegas[b - 1] for b in arrs[row]]
            prod = ordered[0]
            for o in ordered[1:]:
                prod = multiply(law, prod, o)
            lam = lam + (prod if sign > 0 else -prod)
        phase = -2 * cmath.pi * sum(float(a) * b for a, b in zip(lam.coords, xi))
        total += float(w) * cmath.exp(1j * phase)
    return total


def gcs_window_bound(entry: CatalogEntry, measure, level: int, block_len: int,
                     segments: int, xi) -> float:
    """Right side of the window bound at a frequency supported up to `level`."""
    f_val = exact_commutator_char(entry, measure, level, block_len, xi)
    return (1 - 2.0 ** -(level - 1) + 2.0 ** -(level - 1) * f_val.real) ** segments


def gcs_enumerate_lhs(entry: CatalogEntry, measure, level: int, block_len: int,
                      segments: int, xi) -> float:
    """Exact enumeration of the averaged phase of the alternating sum.

    Discrete measures only; averages over all increment strings and all
    pairs of bit stacks.
    """
    from .measures import Discrete

    if not isinstance(measure, Discrete):
        raise StructuralError("enumeration needs a discrete measure")
    law = group_law(entry)
    n = block_len * level * segments
    spec = ActionSpec(level, block_len, segments, 0, n)
    elements = spec.elements()
    xi = [float(x) for x in xi]
    total = 0.0
    weight_total = Fraction(0)
    vectors = [LieVector(entry.spec, atom) for atom in measure.atoms]
    for combo in iproduct(range(len(vectors)), repeat=n):
        w = Fraction(1)
        for i in combo:
            w *= measure.weights[i]
        xs = [vectors[i] for i in combo]
        inner = 0.0
        for tau0 in elements:
            for tau1 in elements:
                v = alternating_sum(spec, law, tau0, tau1, xs)
                phase = 2 * cmath.pi * float(sum(
                    float(a) * float(b) for a, b in zip(xi, v.coords)))
                inner += cmath.exp(1j * phase).real
        total += float(w) * inner / len(elements) ** 2
        weight_total += w
    assert abs(float(weight_total) - 1.0) < 1e-9
    return total
