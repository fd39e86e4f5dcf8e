"""Increment measures: exact moments, characteristic functions, matching.

Four measure shapes cover everything the experiments need: finite atom
sets, boxes driven by independent uniform coordinates with affine
read-outs, mixtures, and centered diagonal Gaussians.  All atom
coordinates, box bounds, affine coefficients, and weights are rationals,
so every polynomial moment is a Fraction and every identity check below
is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct

import numpy as np

from .algebra import GradedBasisSpec, Label
from .catalog import CatalogEntry
from .errors import MeasureError, SolveError
from .sympoly import SparsePolynomial

# ---------------------------------------------------------------------------
# measure variants


def _check_weights(weights) -> tuple[Fraction, ...]:
    ws = tuple(Fraction(w) for w in weights)
    if not ws or any(w <= 0 for w in ws):
        raise MeasureError("weights must be positive")
    if sum(ws) != 1:
        raise MeasureError(f"weights sum to {sum(ws)}, not 1")
    return ws


@dataclass(frozen=True)
class Discrete:
    """Finitely many atoms with rational coordinates and weights."""

    spec: GradedBasisSpec
    atoms: tuple[tuple[Fraction, ...], ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(
            tuple(Fraction(c) for c in atom) for atom in self.atoms))
        object.__setattr__(self, "weights", _check_weights(self.weights))
        if len(self.atoms) != len(self.weights):
            raise MeasureError("one weight per atom")
        for atom in self.atoms:
            if len(atom) != self.spec.total_dim:
                raise MeasureError("atom has the wrong number of coordinates")


@dataclass(frozen=True)
class AffineForm:
    """const + sum of coef * driver, with rational data."""

    const: Fraction = Fraction(0)
    coeffs: tuple[tuple[Label, Fraction], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "const", Fraction(self.const))
        object.__setattr__(self, "coeffs", tuple(
            (tuple(l), Fraction(c)) for l, c in self.coeffs))


@dataclass(frozen=True)
class BoxUniform:
    """Independent uniform drivers; every other coordinate affine in them."""

    spec: GradedBasisSpec
    drivers: tuple[tuple[Label, Fraction, Fraction], ...]
    affine: tuple[tuple[Label, AffineForm], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "drivers", tuple(
            (tuple(l), Fraction(lo), Fraction(hi)) for l, lo, hi in self.drivers))
        object.__setattr__(self, "affine", tuple(
            (tuple(l), f) for l, f in self.affine))
        labels = set(self.spec.labels)
        seen = set()
        for lbl, lo, hi in self.drivers:
            if lbl not in labels:
                raise MeasureError(f"unknown driver label {lbl}")
            if lbl in seen:
                raise MeasureError(f"duplicate driver {lbl}")
            if lo >= hi:
                raise MeasureError(f"driver {lbl} has empty range")
            seen.add(lbl)
        for lbl, form in self.affine:
            if lbl not in labels:
                raise MeasureError(f"unknown affine label {lbl}")
            if lbl in seen:
                raise MeasureError(f"label {lbl} is both driver and affine")
            for dlbl, _ in form.coeffs:
                if dlbl not in {d for d, _, _ in self.drivers}:
                    raise MeasureError(f"affine {lbl} references non-driver {dlbl}")


@dataclass(frozen=True)
class GaussianDiagonal:
    """Centered Gaussian with independent coordinates; rational variances."""

    spec: GradedBasisSpec
    variances: tuple[tuple[Label, Fraction], ...]

    def __post_init__(self):
        object.__setattr__(self, "variances", tuple(
            (tuple(l), Fraction(v)) for l, v in self.variances))
        labels = set(self.spec.labels)
        seen = set()
        for lbl, v in self.variances:
            if lbl not in labels or lbl in seen:
                raise MeasureError(f"bad variance label {lbl}")
            if v <= 0:
                raise MeasureError(f"variance for {lbl} must be positive")
            seen.add(lbl)


@dataclass(frozen=True)
class Mixture:
    components: tuple
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.components:
            raise MeasureError("mixture needs at least one component")
        object.__setattr__(self, "weights", _check_weights(self.weights))
        if len(self.components) != len(self.weights):
            raise MeasureError("one weight per component")
        first = self.components[0].spec
        for c in self.components[1:]:
            if (c.spec.name, c.spec.dims) != (first.name, first.dims):
                raise MeasureError("mixture components live on different algebras")

    @property
    def spec(self):
        return self.components[0].spec


def is_nonatomic(measure) -> bool:
    """True when no single point carries positive mass."""
    if isinstance(measure, Discrete):
        return False
    if isinstance(measure, Mixture):
        return all(is_nonatomic(c) for c in measure.components)
    return True


# ---------------------------------------------------------------------------
# exact moments

LabelMono = tuple[tuple[Label, int], ...]


def _interval_moment(lo: Fraction, hi: Fraction, e: int) -> Fraction:
    if e == 0:
        return Fraction(1)
    return (hi ** (e + 1) - lo ** (e + 1)) / ((e + 1) * (hi - lo))


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def _box_coordinate_poly(box: BoxUniform, label: Label) -> SparsePolynomial:
    """Coordinate as a polynomial in driver variables (seq index 1)."""
    for dlbl, _, _ in box.drivers:
        if dlbl == label:
            return SparsePolynomial.variable((1, *label))
    for albl, form in box.affine:
        if albl == label:
            p = SparsePolynomial.const(form.const)
            for dlbl, c in form.coeffs:
                p.add_scaled(SparsePolynomial.variable((1, *dlbl)), c)
            return p
    return SparsePolynomial()


def moment(measure, mono: LabelMono) -> Fraction:
    """Exact expectation of the coordinate monomial under one draw."""
    mono = tuple((tuple(l), int(e)) for l, e in mono if e)
    if isinstance(measure, Discrete):
        idx = measure.spec.index
        total = Fraction(0)
        for atom, w in zip(measure.atoms, measure.weights):
            val = w
            for lbl, e in mono:
                val *= atom[idx(lbl)] ** e
            total += val
        return total
    if isinstance(measure, BoxUniform):
        poly = SparsePolynomial.const(Fraction(1))
        for lbl, e in mono:
            poly = poly * _box_coordinate_poly(measure, lbl).power(e)
        ranges = {dlbl: (lo, hi) for dlbl, lo, hi in measure.drivers}
        total = Fraction(0)
        for m, c in poly.terms.items():
            val = c
            for (k, n, j), e in m:
                lo, hi = ranges[(n, j)]
                val *= _interval_moment(lo, hi, e)
            total += val
        return total
    if isinstance(measure, GaussianDiagonal):
        var = dict(measure.variances)
        total = Fraction(1)
        for lbl, e in mono:
            v = var.get(lbl)
            if v is None:
                return Fraction(0)
            if e % 2:
                return Fraction(0)
            total *= v ** (e // 2) * _double_factorial(e - 1)
        return total
    if isinstance(measure, Mixture):
        return sum((w * moment(c, mono) for c, w in
                    zip(measure.components, measure.weights)), Fraction(0))
    raise MeasureError(f"unknown measure type {type(measure).__name__}")


def expect_polynomial(measure, poly: SparsePolynomial) -> Fraction:
    """Expectation of a polynomial in i.i.d. draws indexed by seq position."""
    total = Fraction(0)
    for mono, c in poly.terms.items():
        by_seq: dict[int, list] = {}
        for (k, n, j), e in mono:
            by_seq.setdefault(k, []).append(((n, j), e))
        val = c
        for sub in by_seq.values():
            val *= moment(measure, tuple(sub))
            if val == 0:
                break
        total += val
    return total


def enumerate_label_monomials(spec: GradedBasisSpec, max_weight: int) -> list[LabelMono]:
    """All coordinate monomials of homogeneous weight 1..max_weight."""
    out = []

    def rec(i: int, weight_left: int, acc: list):
        if acc:
            out.append(tuple(acc))
        for m in range(i, len(spec.labels)):
            lvl = spec.labels[m][0]
            e = 1
            while lvl * e <= weight_left:
                acc.append((spec.labels[m], e))
                rec(m + 1, weight_left - lvl * e, acc)
                acc.pop()
                e += 1

    rec(0, max_weight, [])
    # rec appends prefixes repeatedly; dedupe preserving order
    seen = set()
    uniq = []
    for m in out:
        if m not in seen:
            seen.add(m)
            uniq.append(m)
    return uniq


def level_mean(measure, level: int) -> tuple[Fraction, ...]:
    spec = measure.spec
    return tuple(moment(measure, ((lbl, 1),))
                 for lbl in spec.labels if lbl[0] == level)


def level1_covariance(measure) -> list[list[Fraction]]:
    spec = measure.spec
    lab = [l for l in spec.labels if l[0] == 1]
    return [[moment(measure, ((a, 1), (b, 1))) if a != b
             else moment(measure, ((a, 2),)) for b in lab] for a in lab]


# ---------------------------------------------------------------------------
# characteristic function of the coordinate vector


def char_fn(measure, xi) -> complex:
    """E[exp(-2 pi i <xi, x>)] for one draw of the full coordinate vector."""
    xi = np.asarray([float(v) for v in xi], dtype=float)
    spec = measure.spec
    if xi.shape != (spec.total_dim,):
        raise MeasureError(f"frequency needs {spec.total_dim} coordinates")
    if isinstance(measure, Discrete):
        out = 0j
        for atom, w in zip(measure.atoms, measure.weights):
            phase = -2 * math.pi * float(sum(float(x) * v for x, v in zip(atom, xi)))
            out += float(w) * complex(math.cos(phase), math.sin(phase))
        return out
    if isinstance(measure, BoxUniform):
        idx = spec.index
        const = 0.0
        for albl, form in measure.affine:
            const += xi[idx(albl)] * float(form.const)
        out = complex(math.cos(-2 * math.pi * const), math.sin(-2 * math.pi * const))
        for dlbl, lo, hi in measure.drivers:
            load = xi[idx(dlbl)]
            for albl, form in measure.affine:
                for d2, c in form.coeffs:
                    if d2 == dlbl:
                        load += xi[idx(albl)] * float(c)
            mid, width = float(lo + hi) / 2, float(hi - lo)
            phase = -2 * math.pi * load * mid
            out *= complex(math.cos(phase), math.sin(phase)) * np.sinc(load * width)
        return out
    if isinstance(measure, GaussianDiagonal):
        idx = spec.index
        expo = sum(float(v) * xi[idx(lbl)] ** 2 for lbl, v in measure.variances)
        return complex(math.exp(-2 * math.pi ** 2 * expo))
    if isinstance(measure, Mixture):
        return sum(float(w) * char_fn(c, xi)
                   for c, w in zip(measure.components, measure.weights))
    raise MeasureError(f"unknown measure type {type(measure).__name__}")


def level1_char_fn(measure, xi1) -> complex:
    """Characteristic function of the level-1 marginal."""
    spec = measure.spec
    xi = [0.0] * spec.total_dim
    lab1 = [l for l in spec.labels if l[0] == 1]
    if len(xi1) != len(lab1):
        raise MeasureError(f"level-1 frequency needs {len(lab1)} coordinates")
    for lbl, v in zip(lab1, xi1):
        xi[spec.index(lbl)] = float(v)
    return char_fn(measure, xi)


# ---------------------------------------------------------------------------
# sampling


def sample_coords(measure, rng: np.random.Generator, count: int) -> np.ndarray:
    """(count, q) float array of coordinate draws."""
    spec = measure.spec
    q = spec.total_dim
    if isinstance(measure, Discrete):
        atoms = np.array([[float(c) for c in a] for a in measure.atoms])
        p = np.array([float(w) for w in measure.weights])
        idx = rng.choice(len(atoms), size=count, p=p / p.sum())
        return atoms[idx]
    if isinstance(measure, BoxUniform):
        out = np.zeros((count, q))
        draws = {}
        for dlbl, lo, hi in measure.drivers:
            u = rng.uniform(float(lo), float(hi), size=count)
            draws[dlbl] = u
            out[:, spec.index(dlbl)] = u
        for albl, form in measure.affine:
            col = np.full(count, float(form.const))
            for dlbl, c in form.coeffs:
                col += float(c) * draws[dlbl]
            out[:, spec.index(albl)] = col
        return out
    if isinstance(measure, GaussianDiagonal):
        out = np.zeros((count, q))
        for lbl, v in measure.variances:
            out[:, spec.index(lbl)] = rng.normal(0.0, math.sqrt(float(v)), size=count)
        return out
    if isinstance(measure, Mixture):
        p = np.array([float(w) for w in measure.weights])
        which = rng.choice(len(measure.components), size=count, p=p / p.sum())
        out = np.zeros((count, q))
        for i, comp in enumerate(measure.components):
            mask = which == i
            n_i = int(mask.sum())
            if n_i:
                out[mask] = sample_coords(comp, rng, n_i)
        return out
    raise MeasureError(f"unknown measure type {type(measure).__name__}")


# ---------------------------------------------------------------------------
# stock measures


def default_box_measure(entry: CatalogEntry, half_width=Fraction(1, 2)) -> BoxUniform:
    """Independent uniform level-1 coordinates, zero above level 1."""
    h = Fraction(half_width)
    drivers = tuple((lbl, -h, h) for lbl in entry.spec.labels if lbl[0] == 1)
    return BoxUniform(entry.spec, drivers)


def rademacher_measure(entry: CatalogEntry) -> Discrete:
    """Uniform on sign patterns of the level-1 coordinates."""
    lab1 = [l for l in entry.spec.labels if l[0] == 1]
    q = entry.spec.total_dim
    atoms = []
    for signs in iproduct((Fraction(-1), Fraction(1)), repeat=len(lab1)):
        coords = [Fraction(0)] * q
        for lbl, s in zip(lab1, signs):
            coords[entry.spec.index(lbl)] = s
        atoms.append(tuple(coords))
    w = Fraction(1, len(atoms))
    return Discrete(entry.spec, tuple(atoms), (w,) * len(atoms))


def negate_measure(measure):
    """The pushforward of the measure under coordinate negation."""
    if isinstance(measure, Discrete):
        atoms = tuple(tuple(-c for c in a) for a in measure.atoms)
        return Discrete(measure.spec, atoms, measure.weights)
    if isinstance(measure, BoxUniform):
        drivers = tuple((lbl, -hi, -lo) for lbl, lo, hi in measure.drivers)
        affine = tuple(
            (lbl, AffineForm(-form.const, form.coeffs))
            for lbl, form in measure.affine
        )
        return BoxUniform(measure.spec, drivers, affine)
    if isinstance(measure, GaussianDiagonal):
        return measure
    if isinstance(measure, Mixture):
        return Mixture(
            tuple(negate_measure(c) for c in measure.components), measure.weights
        )
    raise MeasureError(f"unknown measure type {type(measure).__name__}")


def is_symmetric(measure) -> bool:
    """Whether the measure equals its pushforward under negation.

    Mixtures are compared as weighted multisets of component descriptions, so
    a pair of mirrored components counts as symmetric even though neither
    component is on its own.
    """
    def key(m):
        if isinstance(m, Discrete):
            rows = sorted(
                (tuple(map(str, a)), str(w)) for a, w in zip(m.atoms, m.weights)
            )
            return ("discrete", tuple(rows))
        if isinstance(m, Mixture):
            parts = sorted(
                (str(w), key(c)) for w, c in zip(m.weights, m.components)
            )
            return ("mixture", tuple(parts))
        return repr(measure_to_json(m))

    return key(measure) == key(negate_measure(measure))


# ---------------------------------------------------------------------------
# generator coefficients


@dataclass(frozen=True)
class GeneratorCoefficients:
    """Second-order level-1 matrix and first-order level-2 coefficients."""

    second_order: tuple[tuple[Fraction, ...], ...]
    first_order: tuple[Fraction, ...]


def generator_coefficients(entry: CatalogEntry, measure) -> GeneratorCoefficients:
    """Diffusion data of the walk: half the level-1 covariance, plus the
    level-2 drift corrected by the bracket contribution of the covariance.

    Rejects measures whose level-1 mean is nonzero; those walks drift at
    level 1 and have no centered limit.
    """
    spec = entry.spec
    lab1 = [l for l in spec.labels if l[0] == 1]
    lab2 = [l for l in spec.labels if l[0] == 2]
    for lbl in lab1:
        if moment(measure, ((lbl, 1),)) != 0:
            raise MeasureError(f"level-1 coordinate {lbl} is not centered")
    a = [[Fraction(0)] * len(lab1) for _ in lab1]
    for i, li in enumerate(lab1):
        for j, lj in enumerate(lab1):
            mono = ((li, 2),) if i == j else ((li, 1), (lj, 1))
            a[i][j] = moment(measure, mono) / 2
    first = []
    for l2 in lab2:
        val = moment(measure, ((l2, 1),))
        for i, li in enumerate(lab1):
            for lj in lab1[i + 1:]:
                coef = entry.constants.pair(li, lj).get(l2, Fraction(0))
                if coef:
                    val -= moment(measure, ((li, 1), (lj, 1))) * coef / 2
        first.append(val)
    return GeneratorCoefficients(
        tuple(tuple(row) for row in a), tuple(first))


# ---------------------------------------------------------------------------
# Cramer-type frequency check


@dataclass(frozen=True)
class CramerReport:
    verdict: str                       # "fails" | "holds" | "inconclusive"
    witness: tuple | None = None       # exact frequency with |char| = 1
    witness_modulus: float | None = None
    sup_found: float | None = None
    sup_point: tuple | None = None
    tail_radius: float | None = None
    margin: float | None = None
    note: str = ""

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "witness": None if self.witness is None else [str(v) for v in self.witness],
            "witness_modulus": self.witness_modulus,
            "sup_found": self.sup_found,
            "sup_point": None if self.sup_point is None else list(self.sup_point),
            "tail_radius": self.tail_radius,
            "margin": self.margin,
            "note": self.note,
        }


def _integer_row_hnf(rows: list[list[int]]) -> list[list[int]]:
    """Echelon basis of the integer row lattice, via unimodular row ops."""
    mat = [list(r) for r in rows if any(r)]
    if not mat:
        return []
    cols = len(mat[0])
    basis = []
    for c in range(cols):
        while True:
            live = [r for r in mat if r[c] != 0]
            if len(live) <= 1:
                break
            live.sort(key=lambda r: abs(r[c]))
            piv = live[0]
            for r in live[1:]:
                f = r[c] // piv[c]
                for i in range(cols):
                    r[i] -= f * piv[i]
            mat = [r for r in mat if any(r)]
        live = [r for r in mat if r[c] != 0]
        if live:
            piv = live[0]
            if piv[c] < 0:
                piv[:] = [-v for v in piv]
            basis.append(list(piv))
            mat = [r for r in mat if r is not piv]
    return basis


def _rational_null_vector(rows: list[list[Fraction]], dim: int):
    """A nonzero rational vector orthogonal to all rows, or None."""
    mat = [r[:] for r in rows]
    pivots = []
    r = 0
    for c in range(dim):
        sel = None
        for i in range(r, len(mat)):
            if mat[i][c] != 0:
                sel = i
                break
        if sel is None:
            continue
        mat[r], mat[sel] = mat[sel], mat[r]
        inv = mat[r][c]
        mat[r] = [v / inv for v in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [v - f * p for v, p in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    free = [c for c in range(dim) if c not in pivots]
    if not free:
        return None
    c0 = free[0]
    vec = [Fraction(0)] * dim
    vec[c0] = Fraction(1)
    for row, pc in zip(mat, pivots):
        vec[pc] = -row[c0]
    return vec


def _fraction_solve(mat, rhs):
    """Solve a square rational system exactly; SolveError if singular."""
    n = len(mat)
    a = [row[:] + [rhs[i]] for i, row in enumerate(mat)]
    for c in range(n):
        sel = next((i for i in range(c, n) if a[i][c] != 0), None)
        if sel is None:
            raise SolveError("singular system", residual=None)
        a[c], a[sel] = a[sel], a[c]
        inv = a[c][c]
        a[c] = [v / inv for v in a[c]]
        for i in range(n):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                a[i] = [v - f * p for v, p in zip(a[i], a[c])]
    return [a[i][n] for i in range(n)]


def _discrete_unit_witness(atoms1: list[tuple[Fraction, ...]]):
    """Exact nonzero frequency where a rational atom set has |char| = 1."""
    d = len(atoms1[0])
    diffs = [[a - b for a, b in zip(atom, atoms1[0])] for atom in atoms1[1:]]
    diffs = [r for r in diffs if any(r)]
    if not diffs:
        return tuple([Fraction(1)] + [Fraction(0)] * (d - 1))
    null = _rational_null_vector(diffs, d)
    if null is not None:
        scale = max(abs(v) for v in null)
        return tuple(v / scale for v in null)
    denom = 1
    for row in diffs:
        for v in row:
            denom = denom * v.denominator // math.gcd(denom, v.denominator)
    int_rows = [[int(v * denom) for v in row] for row in diffs]
    basis = _integer_row_hnf(int_rows)
    frac_basis = [[Fraction(v) for v in row] for row in basis]
    best = None
    for m in range(len(frac_basis)):
        rhs = [Fraction(1) if i == m else Fraction(0) for i in range(len(frac_basis))]
        y = _fraction_solve(frac_basis, rhs)
        xi = tuple(v * denom for v in y)
        norm2 = sum(v * v for v in xi)
        if best is None or norm2 < best[0]:
            best = (norm2, xi)
    return best[1]


def _level1_linear_loads(measure):
    """Rows: level-1 coordinate loadings over continuous driver directions.

    Returns (matrix C, widths) where row m gives the coefficients of
    level-1 coordinate m over the independent continuous directions, and
    widths are the corresponding uniform ranges (None for Gaussian
    directions, handled separately).
    """
    spec = measure.spec
    lab1 = [l for l in spec.labels if l[0] == 1]
    if isinstance(measure, BoxUniform):
        dlist = list(measure.drivers)
        C = [[Fraction(0)] * len(dlist) for _ in lab1]
        for di, (dlbl, lo, hi) in enumerate(dlist):
            for mi, lbl in enumerate(lab1):
                if lbl == dlbl:
                    C[mi][di] = Fraction(1)
        for albl, form in measure.affine:
            if albl[0] != 1:
                continue
            mi = lab1.index(albl)
            for dlbl, c in form.coeffs:
                di = next(i for i, (dl, _, _) in enumerate(dlist) if dl == dlbl)
                C[mi][di] = c
        widths = [float(hi - lo) for _, lo, hi in dlist]
        return C, widths
    raise MeasureError("linear loads only defined for box measures")


def _sphere_grid(dim: int, radius_lo: float, radius_hi: float, count: int):
    """Deterministic low-discrepancy points in a centered annulus."""
    from scipy.stats import qmc

    eng = qmc.Sobol(d=dim, scramble=False)
    pts = eng.random_base2(max(4, math.ceil(math.log2(count)) + 2)) * 2.0 - 1.0
    norms = np.linalg.norm(pts, axis=1)
    keep = norms > 1e-9
    pts, norms = pts[keep], norms[keep]
    radii = np.linspace(radius_lo, radius_hi, len(pts))
    return pts / norms[:, None] * radii[:, None]


def cramer_check(measure, *, margin: float = 0.05, inner_radius: float = 1.0,
                 grid: int = 4096, refine_rounds: int = 40) -> CramerReport:
    """Decide whether the level-1 marginal keeps |char fn| away from 1.

    Rational atom sets always fail, and the failure comes with an exact
    frequency witness.  Box and Gaussian measures are certified through an
    analytic tail bound plus a low-discrepancy grid scan with local
    refinement; anything the bounds cannot close is reported inconclusive
    rather than guessed.
    """
    spec = measure.spec
    lab1 = [l for l in spec.labels if l[0] == 1]
    d1 = len(lab1)

    def modulus(xi1):
        return abs(level1_char_fn(measure, xi1))

    # exact witness paths -------------------------------------------------
    if isinstance(measure, Discrete):
        atoms1 = [tuple(atom[spec.index(l)] for l in lab1) for atom in measure.atoms]
        xi = _discrete_unit_witness(atoms1)
        return CramerReport(
            verdict="fails", witness=xi, witness_modulus=modulus(xi),
            note="finite rational support lies on a coset of a proper lattice")

    if isinstance(measure, GaussianDiagonal):
        var = dict(measure.variances)
        missing = [l for l in lab1 if l not in var]
        if missing:
            xi = tuple(Fraction(1) if l == missing[0] else Fraction(0) for l in lab1)
            return CramerReport(verdict="fails", witness=xi,
                                witness_modulus=modulus(xi),
                                note="degenerate direction carries no mass")
        vmin = min(float(var[l]) for l in lab1)
        sup = math.exp(-2 * math.pi ** 2 * vmin * inner_radius ** 2)
        verdict = "holds" if sup <= 1 - margin else "inconclusive"
        return CramerReport(verdict=verdict, sup_found=sup,
                            tail_radius=inner_radius, margin=margin,
                            note="closed form; modulus decays monotonically")

    if isinstance(measure, BoxUniform):
        components, comp_weights = [measure], [Fraction(1)]
    elif isinstance(measure, Mixture):
        components, comp_weights = list(measure.components), list(measure.weights)
        if any(isinstance(c, Discrete) for c in components):
            return CramerReport(verdict="inconclusive",
                                note="mixture with atomic part; no bound attempted")
    else:
        raise MeasureError(f"unknown measure type {type(measure).__name__}")

    # per-component decay rates; exact witness on a degenerate direction --
    tails = []
    all_loads: list[list[Fraction]] = []
    boxes_only = all(isinstance(c, BoxUniform) for c in components)
    for comp in components:
        if isinstance(comp, GaussianDiagonal):
            var = dict(comp.variances)
            if any(l not in var for l in lab1):
                tails.append(None)
            else:
                tails.append(("gauss", min(float(var[l]) for l in lab1)))
            continue
        C, widths = _level1_linear_loads(comp)
        all_loads.extend([list(col) for col in zip(*C)])
        float_c = np.array([[float(v) for v in row] for row in C])
        if np.linalg.matrix_rank(float_c, tol=1e-10) < d1:
            tails.append(None)
            continue
        sigma = float(np.linalg.svd(float_c.T, compute_uv=False)[-1])
        tails.append(("box", sigma * min(widths) / math.sqrt(len(widths))))

    # a direction no component spreads in: modulus can only fail to be 1
    # if component phases disagree, so confirm before declaring a witness
    if boxes_only and any(t is None for t in tails):
        null = _rational_null_vector(all_loads, d1)
        if null is not None:
            scale = max(abs(v) for v in null)
            xi = tuple(v / scale for v in null)
            mod = modulus(xi)
            if mod > 1 - 1e-12:
                return CramerReport(
                    verdict="fails", witness=xi, witness_modulus=mod,
                    note="level-1 support spans a proper subspace")

    def tail_bound(radius: float) -> float:
        total = 0.0
        for w, t in zip(comp_weights, tails):
            if t is None:
                total += float(w)
            elif t[0] == "gauss":
                total += float(w) * math.exp(-2 * math.pi ** 2 * t[1] * radius ** 2)
            else:
                total += float(w) * min(1.0, 1.0 / (math.pi * t[1] * radius)
                                        if t[1] > 0 else 1.0)
        return total

    radius = max(inner_radius * 2, 2.0)
    for _ in range(60):
        if tail_bound(radius) <= 1 - margin:
            break
        radius *= 2
    else:
        return CramerReport(verdict="inconclusive", margin=margin,
                            note="no analytic tail bound below the margin")

    pts = _sphere_grid(d1, inner_radius, radius, grid)
    vals = np.array([modulus(p) for p in pts])
    order = np.argsort(vals)[::-1][:8]
    best_val, best_pt = float(vals[order[0]]), pts[order[0]].copy()
    for start in order:
        x = pts[start].copy()
        step = (radius - inner_radius) / 16
        cur = float(modulus(x))
        for _ in range(refine_rounds):
            improved = False
            for m in range(d1):
                for s in (step, -step):
                    y = x.copy()
                    y[m] += s
                    r = np.linalg.norm(y)
                    if r < inner_radius or r > radius:
                        continue
                    v = float(modulus(y))
                    if v > cur:
                        cur, x, improved = v, y, True
            if not improved:
                step /= 2
        if cur > best_val:
            best_val, best_pt = cur, x
    verdict = "holds" if best_val <= 1 - margin else "inconclusive"
    return CramerReport(verdict=verdict, sup_found=best_val,
                        sup_point=tuple(float(v) for v in best_pt),
                        tail_radius=radius, margin=margin,
                        note="grid scan inside the tail radius")


# ---------------------------------------------------------------------------
# moment-matched continuous measures


def _exact_ldl(mat):
    """LDL^T of a rational PSD matrix; SolveError if indefinite."""
    n = len(mat)
    L = [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    d = [Fraction(0)] * n
    for j in range(n):
        d[j] = mat[j][j] - sum(L[j][k] * L[j][k] * d[k] for k in range(j))
        if d[j] < 0:
            raise SolveError("matrix is not positive semidefinite",
                             residual=float(d[j]))
        for i in range(j + 1, n):
            off = mat[i][j] - sum(L[i][k] * L[j][k] * d[k] for k in range(j))
            if d[j] == 0:
                if off != 0:
                    raise SolveError("matrix is not positive semidefinite",
                                     residual=float(off))
                continue
            L[i][j] = off / d[j]
    return L, d


def _column_dependencies(atoms1: list[list[Fraction]]):
    """Pivot columns and exact linear expressions for the rest.

    Returns (pivots, reps) where reps[c] is None for pivot columns and a
    list of (pivot position, coefficient) otherwise.
    """
    if not atoms1:
        return [], []
    cols = len(atoms1[0])
    pivots: list[int] = []
    reps: list = [None] * cols
    basis: list[list[Fraction]] = []
    for c in range(cols):
        col = [row[c] for row in atoms1]
        coeffs = _solve_in_span(basis, col)
        if coeffs is None:
            pivots.append(c)
            basis.append(col)
        else:
            reps[c] = [(i, v) for i, v in enumerate(coeffs) if v != 0]
    return pivots, reps


def _solve_in_span(basis: list[list[Fraction]], target: list[Fraction]):
    """Coefficients expressing target over basis vectors, or None."""
    if not basis:
        return [] if all(v == 0 for v in target) else None
    rows = len(target)
    n = len(basis)
    aug = [[basis[k][i] for k in range(n)] + [target[i]] for i in range(rows)]
    r = 0
    pivots = []
    for c in range(n):
        sel = next((i for i in range(r, rows) if aug[i][c] != 0), None)
        if sel is None:
            continue
        aug[r], aug[sel] = aug[sel], aug[r]
        inv = aug[r][c]
        aug[r] = [v / inv for v in aug[r]]
        for i in range(rows):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [v - f * p for v, p in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
    sol = [Fraction(0)] * n
    for row, pc in zip(aug, pivots):
        sol[pc] = row[n]
    # consistency
    for i in range(rows):
        lhs = sum(sol[k] * basis[k][i] for k in range(n))
        if lhs != target[i]:
            return None
    return sol


def _rational_sqrt_at_least(x: Fraction) -> Fraction:
    """A rational s with s*s >= x, close to sqrt(x)."""
    if x <= 0:
        return Fraction(0)
    s = Fraction(math.sqrt(float(x))).limit_denominator(10 ** 6)
    bump = Fraction(1000001, 1000000)
    for _ in range(200):
        if s * s >= x:
            return s
        s *= bump
    raise SolveError("rational square root search failed", residual=float(x))


def matched_measure(entry: CatalogEntry, target, *,
                    spread_fraction: Fraction = Fraction(1, 5)):
    """A non-atomic measure matching every moment of weight at most 3.

    Already non-atomic targets are returned unchanged.  Atomic targets are
    rebuilt as a mixture: a weight-1/8 copy of the atoms dilated by 2
    (which preserves all weight-3 moments on its own), symmetric box pairs
    that restore the covariance, and a filler box carrying the remaining
    level-2 mean.  All bookkeeping is rational, so the match is exact, and
    the result is verified against the target before it is returned.
    """
    spec = entry.spec
    if is_nonatomic(target):
        return target
    if not isinstance(target, Discrete):
        raise MeasureError("only atomic targets that are plain atom sets "
                           "can be rebuilt; split mixtures first")
    lab1 = [l for l in spec.labels if l[0] == 1]
    lab2 = [l for l in spec.labels if l[0] == 2]
    for lbl in lab1:
        if moment(target, ((lbl, 1),)) != 0:
            raise MeasureError(f"level-1 coordinate {lbl} is not centered")

    atoms1 = [[atom[spec.index(l)] for l in lab1] for atom in target.atoms]
    pivots, reps = _column_dependencies(atoms1)
    drivers = [lab1[c] for c in pivots]
    r = len(drivers)

    if r == 0:
        # no level-1 variation: spread the lowest populated higher level
        lvl = next((lv for lv in range(2, spec.step + 1)
                    if any(l[0] == lv for l in spec.labels)), None)
        if lvl is None:
            raise MeasureError("measure is a point mass; nothing to spread")
        labs = [l for l in spec.labels if l[0] == lvl]
        eps = Fraction(1, 2)
        comps = []
        for atom in target.atoms:
            dr = tuple((l, atom[spec.index(l)] - eps, atom[spec.index(l)] + eps)
                       for l in labs)
            aff = tuple((l, AffineForm(atom[spec.index(l)]))
                        for l in spec.labels if l not in labs)
            comps.append(BoxUniform(spec, dr, aff))
        out = Mixture(tuple(comps), target.weights)
        _assert_matched(entry, target, out)
        return out

    def affine_forms(center_driver_vals, upper_consts, eps):
        """Box at the given driver center with exact linear read-outs."""
        dr = tuple((drivers[i], center_driver_vals[i] - eps,
                    center_driver_vals[i] + eps) for i in range(r))
        aff = []
        for c, lbl in enumerate(lab1):
            if reps[c] is None:
                continue
            aff.append((lbl, AffineForm(Fraction(0),
                                        tuple((drivers[i], v) for i, v in reps[c]))))
        for lbl, v in upper_consts.items():
            aff.append((lbl, AffineForm(v)))
        return BoxUniform(spec, dr, tuple(aff))

    # covariance of the driver coordinates
    sigma = [[moment(target, ((a, 1), (b, 1))) if a != b
              else moment(target, ((a, 2),))
              for b in drivers] for a in drivers]
    lam_min = float(np.linalg.eigvalsh(
        np.array([[float(v) for v in row] for row in sigma])).min())
    if lam_min <= 0:
        raise SolveError("driver covariance unexpectedly singular",
                         residual=lam_min)
    eps = Fraction(math.sqrt(float(spread_fraction) * 1.5 * lam_min)
                   ).limit_denominator(10 ** 6)

    L = d = None
    for _ in range(80):
        kprime = [[Fraction(4, 7) * sigma[i][j]
                   - (Fraction(8, 21) * eps * eps if i == j else 0)
                   for j in range(r)] for i in range(r)]
        try:
            L, d = _exact_ldl(kprime)
            if all(v > 0 for v in d):
                break
        except SolveError:
            pass
        eps /= 2
    else:
        raise SolveError("no spread width keeps the correction positive",
                         residual=float(eps))

    m = r
    pair_dirs = []
    betas = []
    for j in range(r):
        col = [L[i][j] for i in range(r)]
        s = _rational_sqrt_at_least(Fraction(m + 1) * d[j])
        pair_dirs.append([s * v for v in col])
        betas.append(d[j] / (s * s))
    beta0 = 1 - sum(betas)
    if beta0 <= 0:
        raise SolveError("filler weight went nonpositive", residual=float(beta0))

    b2 = {lbl: moment(target, ((lbl, 1),)) for lbl in lab2}
    filler_upper = {lbl: 4 * v / (7 * beta0) for lbl, v in b2.items() if v != 0}

    comps = []
    weights = []
    for atom, w in zip(target.atoms, target.weights):
        center = [2 * atom[spec.index(dl)] for dl in drivers]
        upper = {}
        for lbl in spec.labels:
            if lbl[0] >= 2:
                v = atom[spec.index(lbl)]
                if v != 0:
                    upper[lbl] = v * Fraction(2) ** lbl[0]
        comps.append(affine_forms(center, upper, eps))
        weights.append(w / 8)
    for direction, beta in zip(pair_dirs, betas):
        for sign in (1, -1):
            comps.append(affine_forms([sign * v for v in direction], {}, eps))
            weights.append(Fraction(7, 8) * beta / 2)
    comps.append(affine_forms([Fraction(0)] * r, filler_upper, eps))
    weights.append(Fraction(7, 8) * beta0)

    out = Mixture(tuple(comps), tuple(weights))
    _assert_matched(entry, target, out)
    return out


def _assert_matched(entry: CatalogEntry, target, built, max_weight: int = 3):
    worst = verify_moment_match(entry, target, built, max_weight=max_weight)
    if worst != 0:
        raise SolveError("moment match failed", residual=float(worst))


def verify_moment_match(entry: CatalogEntry, a, b, max_weight: int = 3) -> Fraction:
    """Largest absolute moment discrepancy over weights 1..max_weight."""
    worst = Fraction(0)
    for mono in enumerate_label_monomials(entry.spec, max_weight):
        diff = abs(moment(a, mono) - moment(b, mono))
        if diff > worst:
            worst = diff
    return worst


# ---------------------------------------------------------------------------
# JSON round trip


def _frac_str(v: Fraction) -> str:
    return str(v)


def _parse_frac(s) -> Fraction:
    return Fraction(s)


def measure_to_json(measure) -> dict:
    if isinstance(measure, Discrete):
        return {"type": "discrete",
                "atoms": [[_frac_str(c) for c in a] for a in measure.atoms],
                "weights": [_frac_str(w) for w in measure.weights]}
    if isinstance(measure, BoxUniform):
        return {"type": "box",
                "drivers": [{"label": list(l), "lo": _frac_str(lo),
                             "hi": _frac_str(hi)}
                            for l, lo, hi in measure.drivers],
                "affine": [{"label": list(l), "const": _frac_str(f.const),
                            "coeffs": [{"driver": list(dl), "coef": _frac_str(c)}
                                       for dl, c in f.coeffs]}
                           for l, f in measure.affine]}
    if isinstance(measure, GaussianDiagonal):
        return {"type": "gaussian",
                "variances": [{"label": list(l), "var": _frac_str(v)}
                              for l, v in measure.variances]}
    if isinstance(measure, Mixture):
        return {"type": "mixture",
                "weights": [_frac_str(w) for w in measure.weights],
                "components": [measure_to_json(c) for c in measure.components]}
    raise MeasureError(f"unknown measure type {type(measure).__name__}")


def measure_from_json(spec: GradedBasisSpec, obj: dict):
    kind = obj.get("type")
    if kind == "discrete":
        return Discrete(spec,
                        tuple(tuple(_parse_frac(c) for c in a) for a in obj["atoms"]),
                        tuple(_parse_frac(w) for w in obj["weights"]))
    if kind == "box":
        return BoxUniform(
            spec,
            tuple((tuple(d["label"]), _parse_frac(d["lo"]), _parse_frac(d["hi"]))
                  for d in obj["drivers"]),
            tuple((tuple(a["label"]),
                   AffineForm(_parse_frac(a.get("const", "0")),
                              tuple((tuple(c["driver"]), _parse_frac(c["coef"]))
                                    for c in a.get("coeffs", ()))))
                  for a in obj.get("affine", ())))
    if kind == "gaussian":
        return GaussianDiagonal(spec, tuple(
            (tuple(v["label"]), _parse_frac(v["var"])) for v in obj["variances"]))
    if kind == "mixture":
        return Mixture(tuple(measure_from_json(spec, c) for c in obj["components"]),
                       tuple(_parse_frac(w) for w in obj["weights"]))
    raise MeasureError(f"unknown measure json type {kind!r}")
