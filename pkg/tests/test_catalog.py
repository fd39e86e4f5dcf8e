import json

import pytest

from nilwalk.catalog import catalog, get_group, load_algebra_json, parse_algebra_json
from nilwalk.errors import StructuralError


def test_catalog_contents():
    entries = catalog()
    assert set(entries) == {"heisenberg3", "ut4", "free2step3"}
    assert entries["heisenberg3"].spec.dims == (2, 1)
    assert entries["ut4"].spec.dims == (3, 2, 1)
    assert entries["free2step3"].spec.dims == (2, 1, 2)
    assert entries["heisenberg3"].matrix_dim == 3
    assert entries["ut4"].matrix_dim == 4
    assert entries["free2step3"].matrix_dim is None


def test_catalog_is_cached():
    assert catalog() is catalog()
    assert get_group("ut4") is catalog()["ut4"]


def test_get_group_unknown_name():
    with pytest.raises(StructuralError, match="unknown group"):
        get_group("heisenberg5")


VALID = {
    "step": 2,
    "dims": [2, 1],
    "brackets": [
        {"left": [1, 1], "right": [1, 2],
         "out": [{"label": [2, 1], "num": 1, "den": 1}]},
    ],
}


def test_load_valid_json():
    entry = load_algebra_json(json.dumps(VALID), name="mine")
    assert entry.spec.name == "mine"
    assert entry.spec.total_dim == 3
    assert entry.constants.pair((1, 2), (1, 1))[(2, 1)] == -1


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("step"),
    lambda d: d.pop("brackets"),
    lambda d: d.update(step="two"),
    lambda d: d["brackets"][0].pop("out"),
    lambda d: d["brackets"][0].update(left=[1]),
    lambda d: d["brackets"][0]["out"][0].update(den=0),
])
def test_load_rejects_malformed_shapes(mutate):
    doc = json.loads(json.dumps(VALID))
    mutate(doc)
    with pytest.raises(StructuralError):
        load_algebra_json(json.dumps(doc))


def test_load_rejects_duplicate_bracket_records():
    doc = json.loads(json.dumps(VALID))
    doc["brackets"].append(doc["brackets"][0])
    with pytest.raises(StructuralError, match="duplicate"):
        load_algebra_json(json.dumps(doc))


def test_load_rejects_axiom_violations_parse_does_not():
    doc = json.loads(json.dumps(VALID))
    doc["brackets"].append(
        {"left": [1, 2], "right": [1, 1],
         "out": [{"label": [2, 1], "num": 1, "den": 1}]})
    text = json.dumps(doc)
    entry = parse_algebra_json(text)
    assert entry.spec.total_dim == 3
    with pytest.raises(StructuralError, match="antisymmetry"):
        load_algebra_json(text)


def test_load_rejects_non_json():
    with pytest.raises(StructuralError, match="not valid JSON"):
        load_algebra_json("{step: 2")
