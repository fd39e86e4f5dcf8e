"""Graded nilpotent Lie algebras in a fixed homogeneous basis.

A basis element is addressed by a label ``(n, j)``: level ``n`` (1-based,
up to the step) and position ``j`` within the level.  Vectors store one
coordinate per label, in label order.  Two scalar layers are supported and
never mixed: exact (int / Fraction) and float.

Structure constants are stored sparsely per ordered label pair, so a
malformed tensor (e.g. one that breaks antisymmetry) can be represented
and then rejected by ``validate_algebra`` with a witness, instead of being
silently repaired.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import AlgebraMismatchError, LayerError, StructuralError

Label = tuple[int, int]


def _is_exact_scalar(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def _is_float_scalar(v) -> bool:
    return isinstance(v, float)


def scalar_layer(values: Iterable) -> str:
    """Classify a collection of scalars as 'exact' or 'float'.

    Raises LayerError on a mix; an empty collection counts as exact.
    """
    layer = None
    for v in values:
        if _is_exact_scalar(v):
            this = "exact"
        elif _is_float_scalar(v):
            this = "float"
        else:
            raise LayerError(f"unsupported scalar {v!r} of type {type(v).__name__}")
        if layer is None:
            layer = this
        elif layer != this:
            raise LayerError("exact and float scalars mixed in one vector")
    return layer or "exact"


@dataclass(frozen=True)
class GradedBasisSpec:
    """Shape of a graded basis: step and per-level dimensions."""

    name: str
    step: int
    dims: tuple[int, ...]

    def __post_init__(self):
        if self.step < 1:
            raise StructuralError("step must be >= 1")
        if len(self.dims) != self.step:
            raise StructuralError(
                f"dims has {len(self.dims)} entries for step {self.step}"
            )
        if any(d < 0 for d in self.dims):
            raise StructuralError("level dimensions must be non-negative")
        if self.dims and self.dims[0] == 0:
            raise StructuralError("level 1 must be non-empty")

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def homogeneous_dim(self) -> int:
        return sum(n * d for n, d in enumerate(self.dims, start=1))

    @property
    def labels(self) -> tuple[Label, ...]:
        return tuple(
            (n, j)
            for n, d in enumerate(self.dims, start=1)
            for j in range(1, d + 1)
        )

    def index(self, label: Label) -> int:
        """Position of a label in coordinate order."""
        n, j = label
        if not (1 <= n <= self.step) or not (1 <= j <= self.dims[n - 1]):
            raise StructuralError(f"label {label} outside basis {self.name}")
        return sum(self.dims[: n - 1]) + (j - 1)

    def level_slice(self, n: int) -> slice:
        if not (1 <= n <= self.step):
            raise StructuralError(f"level {n} outside step {self.step}")
        start = sum(self.dims[: n - 1])
        return slice(start, start + self.dims[n - 1])


@dataclass(frozen=True)
class LieVector:
    """Coordinates of a Lie algebra element in the fixed graded basis."""

    algebra: GradedBasisSpec
    coords: tuple

    def __post_init__(self):
        if len(self.coords) != self.algebra.total_dim:
            raise StructuralError(
                f"{len(self.coords)} coordinates for a "
                f"{self.algebra.total_dim}-dimensional algebra"
            )
        scalar_layer(self.coords)

    @property
    def layer(self) -> str:
        return scalar_layer(self.coords)

    def __getitem__(self, label: Label):
        return self.coords[self.algebra.index(label)]

    def level(self, n: int) -> tuple:
        return self.coords[self.algebra.level_slice(n)]

    def __add__(self, other: "LieVector") -> "LieVector":
        _same_algebra(self, other)
        return LieVector(self.algebra, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "LieVector":
        return LieVector(self.algebra, tuple(-a for a in self.coords))

    def __sub__(self, other: "LieVector") -> "LieVector":
        return self + (-other)

    def scale(self, r) -> "LieVector":
        return LieVector(self.algebra, tuple(r * a for a in self.coords))

    def is_zero(self) -> bool:
        return all(a == 0 for a in self.coords)


def _same_algebra(x: LieVector, y: LieVector):
    if x.algebra != y.algebra:
        raise AlgebraMismatchError(
            f"operands from different algebras: {x.algebra.name} vs {y.algebra.name}"
        )


def zero_vector(spec: GradedBasisSpec, layer: str = "exact") -> LieVector:
    fill = Fraction(0) if layer == "exact" else 0.0
    return LieVector(spec, (fill,) * spec.total_dim)


def basis_vector(spec: GradedBasisSpec, label: Label) -> LieVector:
    coords = [Fraction(0)] * spec.total_dim
    coords[spec.index(label)] = Fraction(1)
    return LieVector(spec, tuple(coords))


@dataclass(frozen=True)
class StructureConstants:
    """Sparse bracket tensor over ordered label pairs.

    ``table[(a, b)]`` maps output labels to rational coefficients of
    [X_a, X_b].  A pair may be stored in either order; lookups fall back to
    the negated reverse entry.  Missing pairs bracket to zero.
    """

    spec: GradedBasisSpec
    table: Mapping[tuple[Label, Label], Mapping[Label, Fraction]]

    def pair(self, a: Label, b: Label) -> dict[Label, Fraction]:
        """Coefficients of [X_a, X_b], resolving stored order."""
        if (a, b) in self.table:
            return dict(self.table[(a, b)])
        if (b, a) in self.table:
            return {lbl: -c for lbl, c in self.table[(b, a)].items()}
        return {}

    def bracket_coords(self, x: Mapping[Label, Fraction], y: Mapping[Label, Fraction]) -> dict[Label, Fraction]:
        """Bracket of two sparse coordinate maps (exact layer)."""
        out: dict[Label, Fraction] = {}
        for (a, b), vec in self.table.items():
            xa, yb = x.get(a, 0), y.get(b, 0)
            xb, ya = x.get(b, 0), y.get(a, 0)
            if (b, a) in self.table and a != b:
                # reverse order stored too; it contributes its own term
                coef = xa * yb
            else:
                coef = xa * yb - xb * ya
            if coef:
                for lbl, c in vec.items():
                    out[lbl] = out.get(lbl, Fraction(0)) + coef * c
        return {lbl: c for lbl, c in out.items() if c}


@dataclass
class ValidationIssue:
    kind: str
    message: str
    witness: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    ok: bool
    issues: list[ValidationIssue]

    def by_kind(self, kind: str) -> list[ValidationIssue]:
        return [i for i in self.issues if i.kind == kind]


def validate_algebra(spec: GradedBasisSpec, consts: StructureConstants) -> ValidationReport:
    """Check a structure-constant tensor against the Lie axioms.

    Structural defects (unknown labels, bad scalars) raise StructuralError;
    axiom violations (antisymmetry, grading, Jacobi) are collected into the
    report with witnesses so a caller can show *why* the tensor fails.
    """
    if consts.spec != spec:
        raise StructuralError("structure constants built for a different basis spec")
    labels = set(spec.labels)
    for (a, b), vec in consts.table.items():
        for lbl in (a, b, *vec):
            if lbl not in labels:
                raise StructuralError(f"unknown label {lbl} in bracket table")
        for c in vec.values():
            if not _is_exact_scalar(c):
                raise StructuralError(f"non-rational coefficient {c!r} in bracket table")

    issues: list[ValidationIssue] = []

    for (a, b), vec in consts.table.items():
        if a == b and any(vec.values()):
            issues.append(ValidationIssue(
                "antisymmetry", f"[X_{a}, X_{a}] != 0", {"pair": (a, b), "value": dict(vec)}))
        if (b, a) in consts.table and (a, b) <= (b, a) and a != b:
            rev = consts.table[(b, a)]
            combined = {lbl: vec.get(lbl, 0) + rev.get(lbl, 0) for lbl in set(vec) | set(rev)}
            bad = {lbl: c for lbl, c in combined.items() if c}
            if bad:
                issues.append(ValidationIssue(
                    "antisymmetry", f"[X_{a}, X_{b}] + [X_{b}, X_{a}] != 0",
                    {"pair": (a, b), "defect": bad}))

    for (a, b), vec in consts.table.items():
        want = a[0] + b[0]
        for lbl, c in vec.items():
            if c and lbl[0] != want:
                issues.append(ValidationIssue(
                    "grading",
                    f"[X_{a}, X_{b}] has a level-{lbl[0]} component, expected level {want}",
                    {"pair": (a, b), "label": lbl, "coefficient": c}))
        if want > spec.step and any(vec.values()):
            issues.append(ValidationIssue(
                "grading",
                f"[X_{a}, X_{b}] must vanish beyond step {spec.step}",
                {"pair": (a, b)}))

    # Jacobi only makes sense once the tensor is antisymmetric and graded.
    if not issues:
        basis = spec.labels
        for i, a in enumerate(basis):
            for j in range(i + 1, len(basis)):
                b = basis[j]
                for k in range(j + 1, len(basis)):
                    c = basis[k]
                    if a[0] + b[0] + c[0] > spec.step:
                        continue
                    total: dict[Label, Fraction] = {}
                    for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
                        inner = consts.pair(u, v)
                        term = consts.bracket_coords(inner, {w: Fraction(1)})
                        for lbl, co in term.items():
                            total[lbl] = total.get(lbl, Fraction(0)) + co
                    defect = {lbl: co for lbl, co in total.items() if co}
                    if defect:
                        issues.append(ValidationIssue(
                            "jacobi", f"Jacobi fails on ({a}, {b}, {c})",
                            {"triple": (a, b, c), "defect": defect}))

    return ValidationReport(ok=not issues, issues=issues)


def bracket(consts: StructureConstants, x: LieVector, y: LieVector) -> LieVector:
    """[x, y] via the structure constants.  Both layers supported."""
    _same_algebra(x, y)
    if x.algebra != consts.spec:
        raise AlgebraMismatchError("vectors do not match the structure constants")
    layer = scalar_layer(x.coords + y.coords)
    zero = Fraction(0) if layer == "exact" else 0.0
    out = [zero] * consts.spec.total_dim
    idx = consts.spec.index
    for (a, b), vec in consts.table.items():
        ia, ib = idx(a), idx(b)
        if (b, a) in consts.table and a != b:
            coef = x.coords[ia] * y.coords[ib]
        else:
            coef = x.coords[ia] * y.coords[ib] - x.coords[ib] * y.coords[ia]
        if coef:
            for lbl, c in vec.items():
                out[idx(lbl)] += (c if layer == "exact" else float(c)) * coef
    return LieVector(consts.spec, tuple(out))


def dilate(spec: GradedBasisSpec, r, x: LieVector) -> LieVector:
    """Graded dilation: scale the level-n slice by r**n."""
    if x.algebra != spec:
        raise AlgebraMismatchError("vector does not belong to this algebra")
    coords = list(x.coords)
    rp = r
    for n in range(1, spec.step + 1):
        sl = spec.level_slice(n)
        coords[sl] = [rp * v for v in coords[sl]]
        rp = rp * r
    return LieVector(spec, tuple(coords))
