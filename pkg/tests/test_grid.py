import json

import pytest
from conftest import chain_doc
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dfs_is_tree, tree_paths

from microdispatch import fixture_path
from microdispatch.errors import ParseError, TopologyError, UnknownBranch, ValidationError
from microdispatch.grid import case_from_dict, case_to_dict, load_case, save_case, subtree_of, validate_radial


def test_two_bus_fixture(two_bus):
    assert len(two_bus.buses) == 2
    assert len(two_bus.branches) == 1
    assert two_bus.topology.root == 0
    assert validate_radial(two_bus) == [1]
    assert subtree_of(two_bus, 1) == {1}


def test_ieee69_fixture_is_a_tree(ieee69):
    assert len(ieee69.buses) == 69
    assert len(ieee69.branches) == 68
    assert dfs_is_tree(ieee69)


def test_ieee69_order_parent_before_child(ieee69):
    order = validate_radial(ieee69)
    assert sorted(order) == sorted(br.id for br in ieee69.branches)
    pos = {b: i for i, b in enumerate(order)}
    feeding = {br.to_bus: br.id for br in ieee69.branches}
    for br in ieee69.branches:
        up = feeding.get(br.from_bus)
        if up is not None:
            assert pos[up] < pos[br.id]


def test_ieee69_subtrees_match_path_enumeration(ieee69):
    paths = tree_paths(ieee69)
    for br in ieee69.branches:
        expected = {bus for bus, path in paths.items() if br.id in path}
        assert subtree_of(ieee69, br.id) == expected


def test_star_tie_break_by_branch_id(chain):
    doc = chain_doc(n_bus=3)
    doc["branches"] = [
        {"id": 7, "from_bus": 0, "to_bus": 1, "r": 0.1, "x": 0.1},
        {"id": 3, "from_bus": 0, "to_bus": 2, "r": 0.1, "x": 0.1},
    ]
    assert validate_radial(case_from_dict(doc)) == [3, 7]


def test_leaf_subtree_is_its_bus(lv):
    feeding = {br.from_bus for br in lv.branches}
    for br in lv.branches:
        if br.to_bus not in feeding:
            assert subtree_of(lv, br.id) == {br.to_bus}


def test_unknown_branch(two_bus):
    with pytest.raises(UnknownBranch):
        subtree_of(two_bus, 99)


def test_sibling_subtrees_disjoint_and_cover(ieee69):
    root = ieee69.topology.root
    kids = [br for br in ieee69.branches if br.from_bus == root]
    union = set()
    for br in kids:
        s = subtree_of(ieee69, br.id)
        assert not (union & s)
        union |= s
    assert union | {root} == {b.id for b in ieee69.buses}


def test_duplicate_bus_id():
    doc = chain_doc(n_bus=3)
    doc["buses"][2]["id"] = 1
    with pytest.raises(ValidationError) as err:
        case_from_dict(doc)
    assert err.value.path == "buses[2].id"


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["branches"].append({"id": 9, "from_bus": 2, "to_bus": 0, "r": 0.1, "x": 0.1}),
        lambda d: d["branches"].__setitem__(1, {"id": 2, "from_bus": 2, "to_bus": 2, "r": 0.1, "x": 0.1}),
        lambda d: d["branches"].__setitem__(1, {"id": 2, "from_bus": 1, "to_bus": 5, "r": 0.1, "x": 0.1}),
        lambda d: d["branches"].__setitem__(1, {"id": 2, "from_bus": 0, "to_bus": 1, "r": 0.1, "x": 0.1}),
    ],
    ids=["extra-branch", "self-loop", "unknown-bus", "two-parents"],
)
def test_topology_errors(mutate):
    doc = chain_doc(n_bus=3)
    mutate(doc)
    with pytest.raises(TopologyError):
        case_from_dict(doc)


def test_cycle_detected():
    doc = chain_doc(n_bus=4)
    # 0 is isolated, 1 -> 2 -> 3 -> 1 is a loop
    doc["branches"] = [
        {"id": 1, "from_bus": 1, "to_bus": 2, "r": 0.1, "x": 0.1},
        {"id": 2, "from_bus": 2, "to_bus": 3, "r": 0.1, "x": 0.1},
        {"id": 3, "from_bus": 3, "to_bus": 1, "r": 0.1, "x": 0.1},
    ]
    with pytest.raises(TopologyError):
        case_from_dict(doc)


@pytest.mark.parametrize(
    "path,value,where",
    [
        (("branches", 0, "r"), -1.0, "branches[0]"),
        (("branches", 0, "length"), 0.0, "branches[0].length"),
        (("branches", 0, "failure_rate"), -0.1, "branches[0].failure_rate"),
        (("buses", 1, "load_p_peak"), -5.0, "buses[1]"),
        (("weights", "h1"), -1.0, "weights"),
        (("horizon", "steps"), 0, "horizon.steps"),
    ],
)
def test_validation_paths(path, value, where):
    doc = chain_doc(n_bus=3)
    target = doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises(ValidationError) as err:
        case_from_dict(doc)
    assert err.value.path == where


def test_profile_length_checked():
    doc = chain_doc(steps=3)
    doc["profiles"]["load"] = [1.0, 1.0]
    with pytest.raises(ValidationError):
        case_from_dict(doc)


def test_unknown_field_rejected():
    doc = chain_doc()
    doc["buses"][1]["colour"] = "red"
    with pytest.raises(ValidationError) as err:
        case_from_dict(doc)
    assert err.value.path == "buses[1].colour"


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_case(p)
    with pytest.raises(ParseError):
        load_case(tmp_path / "missing.json")


def test_csv_profile_sidecar(tmp_path):
    doc = chain_doc(steps=3)
    doc["profiles"]["load"] = "load.csv"
    (tmp_path / "load.csv").write_text("hour,value\n0,0.5\n1,0.75\n2,1.0\n")
    (tmp_path / "case.json").write_text(json.dumps(doc))
    case = load_case(tmp_path / "case.json")
    assert case.profiles["load"] == (0.5, 0.75, 1.0)


def test_csv_profile_bad_hours(tmp_path):
    doc = chain_doc(steps=3)
    doc["profiles"]["load"] = "load.csv"
    (tmp_path / "load.csv").write_text("hour,value\n0,0.5\n2,1.0\n")
    (tmp_path / "case.json").write_text(json.dumps(doc))
    with pytest.raises(ParseError):
        load_case(tmp_path / "case.json")


@pytest.mark.parametrize("name", ["two_bus.json", "ieee69.json", "lv_microgrid.json", "lv_microgrid_certain.json"])
def test_save_load_round_trip(tmp_path, name):
    case = load_case(fixture_path(name))
    save_case(case, tmp_path / "c.json")
    again = load_case(tmp_path / "c.json")
    assert case_to_dict(again) == case_to_dict(case)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_random_trees_are_radial(data):
    n = data.draw(st.integers(2, 25))
    parents = [data.draw(st.integers(0, i - 1)) for i in range(1, n)]
    doc = chain_doc(n_bus=n)
    doc["branches"] = [
        {"id": 100 + i, "from_bus": p, "to_bus": i, "r": 0.1, "x": 0.1} for i, p in zip(range(1, n), parents)
    ]
    case = case_from_dict(doc)
    assert len(case.branches) == len(case.buses) - 1
    assert dfs_is_tree(case)
    paths = tree_paths(case)
    for br in case.branches:
        assert subtree_of(case, br.id) == {b for b, path in paths.items() if br.id in path}
