"""Built-in graded algebras and the JSON loader for custom ones.

Catalog entries carry an optional unipotent matrix embedding (label to
elementary-matrix position) used by the independent product oracle; groups
without one fall back to the regular-representation oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .algebra import GradedBasisSpec, Label, StructureConstants, validate_algebra
from .errors import StructuralError


@dataclass(frozen=True)
class CatalogEntry:
    spec: GradedBasisSpec
    constants: StructureConstants
    matrix_dim: int | None = None
    # label -> (row, col) of the elementary matrix it embeds to, 0-based
    matrix_embedding: dict[Label, tuple[int, int]] | None = None
    description: str = ""


def _consts(spec: GradedBasisSpec, entries) -> StructureConstants:
    table = {
        (tuple(a), tuple(b)): {tuple(lbl): Fraction(c) for lbl, c in out.items()}
        for (a, b), out in entries.items()
    }
    return StructureConstants(spec, table)


def _heisenberg3() -> CatalogEntry:
    spec = GradedBasisSpec("heisenberg3", 2, (2, 1))
    consts = _consts(spec, {
        (((1, 1)), ((1, 2))): {(2, 1): 1},
    })
    return CatalogEntry(
        spec, consts, matrix_dim=3,
        matrix_embedding={(1, 1): (0, 1), (1, 2): (1, 2), (2, 1): (0, 2)},
        description="3-dimensional Heisenberg group, step 2",
    )


def _ut4() -> CatalogEntry:
    # Strictly upper triangular 4x4 matrices; brackets of the elementary
    # matrices E12, E23, E34, E13, E24, E14 in that label order.
    spec = GradedBasisSpec("ut4", 3, (3, 2, 1))
    consts = _consts(spec, {
        ((1, 1), (1, 2)): {(2, 1): 1},
        ((1, 2), (1, 3)): {(2, 2): 1},
        ((1, 1), (2, 2)): {(3, 1): 1},
        ((1, 3), (2, 1)): {(3, 1): -1},
    })
    return CatalogEntry(
        spec, consts, matrix_dim=4,
        matrix_embedding={
            (1, 1): (0, 1), (1, 2): (1, 2), (1, 3): (2, 3),
            (2, 1): (0, 2), (2, 2): (1, 3), (3, 1): (0, 3),
        },
        description="upper unitriangular 4x4 group, step 3",
    )


def _free2step3() -> CatalogEntry:
    # Free nilpotent algebra on two generators, step 3, in the Hall basis
    # X1, X2, [X1,X2], [[X1,X2],X1], [[X1,X2],X2].
    spec = GradedBasisSpec("free2step3", 3, (2, 1, 2))
    consts = _consts(spec, {
        ((1, 1), (1, 2)): {(2, 1): 1},
        ((1, 1), (2, 1)): {(3, 1): -1},
        ((1, 2), (2, 1)): {(3, 2): -1},
    })
    return CatalogEntry(
        spec, consts,
        description="free nilpotent group on 2 generators, step 3",
    )


_CATALOG: dict[str, CatalogEntry] = {}


def catalog() -> dict[str, CatalogEntry]:
    if not _CATALOG:
        for builder in (_heisenberg3, _ut4, _free2step3):
            entry = builder()
            report = validate_algebra(entry.spec, entry.constants)
            assert report.ok, f"catalog entry {entry.spec.name} failed validation"
            _CATALOG[entry.spec.name] = entry
    return _CATALOG


def get_group(name: str) -> CatalogEntry:
    try:
        return catalog()[name]
    except KeyError:
        raise StructuralError(
            f"unknown group {name!r}; known: {', '.join(sorted(catalog()))}"
        ) from None


def parse_algebra_json(text: str, name: str = "custom") -> CatalogEntry:
    """Parse a custom algebra description without checking the Lie axioms.

    Expected shape::

        {"step": s, "dims": [d1, ...],
         "brackets": [{"left": [i, j], "right": [k, l],
                       "out": [{"label": [m, n], "num": p, "den": q}, ...]}]}

    Shape problems raise StructuralError; axiom violations are left for the
    caller to detect with validate_algebra, so tools can report witnesses.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise StructuralError(f"algebra JSON is not valid JSON: {e}") from None
    for key in ("step", "dims", "brackets"):
        if key not in data:
            raise StructuralError(f"algebra JSON missing key {key!r}")
    if not isinstance(data["step"], int) or not isinstance(data["dims"], list):
        raise StructuralError("algebra JSON: step must be int, dims a list")
    spec = GradedBasisSpec(name, data["step"], tuple(data["dims"]))
    table: dict[tuple[Label, Label], dict[Label, Fraction]] = {}
    for rec in data["brackets"]:
        try:
            left = tuple(rec["left"])
            right = tuple(rec["right"])
            out = {
                tuple(o["label"]): Fraction(o["num"], o["den"])
                for o in rec["out"]
            }
        except (KeyError, TypeError, ZeroDivisionError) as e:
            raise StructuralError(f"malformed bracket record {rec!r}: {e}") from None
        if len(left) != 2 or len(right) != 2:
            raise StructuralError(f"labels must be [level, position]: {rec!r}")
        if (left, right) in table:
            raise StructuralError(f"duplicate bracket record for {left}, {right}")
        table[(left, right)] = out
    consts = StructureConstants(spec, table)
    return CatalogEntry(spec, consts, description="custom algebra from JSON")


def load_algebra_json(text: str, name: str = "custom") -> CatalogEntry:
    """Parse and validate a custom algebra description.

    Same shape as parse_algebra_json; axiom violations raise StructuralError
    summarizing the first few witnesses.
    """
    entry = parse_algebra_json(text, name)
    report = validate_algebra(entry.spec, entry.constants)
    if not report.ok:
        lines = "; ".join(f"{i.kind}: {i.message}" for i in report.issues[:5])
        raise StructuralError(f"algebra violates Lie axioms: {lines}")
    return entry
