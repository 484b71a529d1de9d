from __future__ import annotations

import json
import random

import pytest
from conftest import DATA, analyze
from hypothesis import given, settings
from hypothesis import strategies as st

from wfmigrate.diagnostics import MigrationError
from wfmigrate.model import (
    Confidence,
    ElementKind,
    ModelElement,
    ModelGraph,
    RelationKind,
    deserialize_model,
    is_markup_prop,
    make_element_id,
    serialize_model,
    split_element_id,
    strongly_connected,
    subgraph_fingerprint,
    validate_model,
)

MINI = DATA / "mini"
PANEL = "componentuse:Nested.aspx#1:asp:Panel"


@pytest.fixture(scope="module")
def mini():
    g, diags = analyze(MINI)
    return g


def rel_set(g, kind):
    return {(r.src, r.dst) for r in g.relations if r.kind is kind}


def test_element_ids():
    eid = make_element_id(ElementKind.COMPONENT_USE, "a/B.aspx", "0:asp:Panel/1:asp:Label")
    assert eid == "componentuse:a/B.aspx#0:asp:Panel/1:asp:Label"
    assert split_element_id(eid) == ("componentuse", "a/B.aspx", "0:asp:Panel/1:asp:Label")
    assert split_element_id(make_element_id(ElementKind.PAGE, "P.aspx")) == ("page", "P.aspx", "")


@pytest.mark.parametrize("name,markup", [
    ("MaxLength", True), ("ID", True), ("tag", False), ("role", False),
    ("constraint.maxLength", False), ("value.default", False), ("nav.NavigateUrl.href", False),
])
def test_is_markup_prop(name, markup):
    assert is_markup_prop(name) is markup


def test_mini_structure(mini):
    assert validate_model(mini) == []
    kinds = {k: len(mini.of_kind(k)) for k in ElementKind}
    assert kinds[ElementKind.PAGE] == 2
    assert kinds[ElementKind.USER_CONTROL] == 1
    assert kinds[ElementKind.RESOURCE_STRING] == 1
    assert kinds[ElementKind.HANDLER_STUB] == 1
    assert kinds[ElementKind.COMPONENT_USE] == 13
    assert rel_set(mini, RelationKind.REGISTERS) == {("page:Nested.aspx#", "usercontrol:Controls/Header.ascx#")}
    assert rel_set(mini, RelationKind.DEPENDS_ON) == {("page:Nested.aspx#", "usercontrol:Controls/Header.ascx#")}
    assert rel_set(mini, RelationKind.BINDS) == {(PANEL + "/0:asp:Label", "resourcestring:Labels#Name")}
    assert rel_set(mini, RelationKind.HANDLES) == {
        ("componentuse:Nested.aspx#3:asp:Button", "handlerstub:Nested.aspx.cs#btnSave_Click")}
    uc_use = mini.elements["componentuse:Nested.aspx#0:uc:Header"]
    assert uc_use.props["uc.id"] == "usercontrol:Controls/Header.ascx#"
    rs = mini.elements["resourcestring:Labels#Name"]
    assert rs.props["value.default"] == "Name" and rs.props["value.de"] == "Name DE"


def test_navigation_helpers(mini):
    assert [c.id for c in mini.children(PANEL)] == [
        PANEL + "/0:asp:Label", PANEL + "/1:asp:TextBox", PANEL + "/2:asp:RequiredFieldValidator",
        PANEL + "/3:asp:DropDownList"]
    leaf = PANEL + "/3:asp:DropDownList/0:asp:ListItem"
    assert mini.container(leaf).id == PANEL + "/3:asp:DropDownList"
    assert mini.owner(leaf).id == "page:Nested.aspx#"
    assert len(mini.descendants("page:Nested.aspx#")) == 10


def test_round_trip_is_identity(mini):
    data = serialize_model(mini)
    back = deserialize_model(data)
    assert back == mini
    assert serialize_model(back) == data
    assert data.endswith(b"\n")


def test_serialization_is_order_independent(mini):
    doc = json.loads(serialize_model(mini))
    rng = random.Random(5)
    rng.shuffle(doc["elements"])
    rng.shuffle(doc["relations"])
    assert serialize_model(deserialize_model(json.dumps(doc))) == serialize_model(mini)


@pytest.mark.parametrize("text", [
    "not json",
    '{"version": 1, "elements": [], "relations": [], "extra": 1}',
    '{"version": 99, "elements": [], "relations": []}',
    '{"version": 1, "version": 1, "elements": [], "relations": []}',
    '{"version": 1, "elements": [{"id": "page:A#"}], "relations": []}',
    '{"version": 1, "elements": [], "relations": [{"kind": "likes", "src": "a", "dst": "b",'
    ' "provenance": null, "confidence": "high"}]}',
])
def test_deserialize_rejects(text):
    with pytest.raises(MigrationError) as exc:
        deserialize_model(text)
    assert exc.value.code == "MODEL_SCHEMA"


def test_deserialize_rejects_non_utf8():
    with pytest.raises(MigrationError):
        deserialize_model(b"\xff\xfe")


def _add(g, kind, path, fragment="", **props):
    e = ModelElement(make_element_id(kind, path, fragment), kind, path, props)
    g.add_element(e)
    return e.id


def test_invariants_detected():
    g = ModelGraph()
    p = _add(g, ElementKind.PAGE, "P.aspx")
    u = _add(g, ElementKind.COMPONENT_USE, "P.aspx", "0:asp:Label")
    q = _add(g, ElementKind.PAGE, "Q.aspx")
    g.add_relation(RelationKind.CONTAINS, p, u)
    g.add_relation(RelationKind.CONTAINS, q, u)
    g.add_relation(RelationKind.BINDS, u, q)
    g.add_relation(RelationKind.HANDLES, u, q)
    g.add_relation(RelationKind.USES, u, "componenttype:asp:Label#")
    codes = sorted(d.code for d in validate_model(g))
    assert codes == ["MODEL_BINDS_KIND", "MODEL_CONTAINMENT_FOREST", "MODEL_DANGLING_REF",
                     "MODEL_HANDLES_KIND", "MODEL_MISSING_TAG"]


def test_dependency_cycles_between_controls_warn():
    g = ModelGraph()
    a = _add(g, ElementKind.USER_CONTROL, "A.ascx")
    b = _add(g, ElementKind.USER_CONTROL, "B.ascx")
    g.add_relation(RelationKind.DEPENDS_ON, a, b)
    g.add_relation(RelationKind.DEPENDS_ON, b, a)
    assert [d.code for d in validate_model(g)] == ["MODEL_DEPENDS_CYCLE"]
    rs = _add(g, ElementKind.RESOURCE_STRING, "L", "k", catalog="L", key="k")
    g.add_relation(RelationKind.DEPENDS_ON, a, rs)
    g.add_relation(RelationKind.DEPENDS_ON, rs, a)
    assert sorted(d.code for d in validate_model(g)) == ["MODEL_INVALID_CYCLE"]


def _reach(edges, s):
    seen, todo = {s}, [s]
    while todo:
        for w in edges.get(todo.pop(), ()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


_graphs = st.integers(1, 9).flatmap(lambda n: st.tuples(
    st.just([f"n{i}" for i in range(n)]),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=20)))


@given(_graphs)
def test_scc_matches_mutual_reachability(graph):
    nodes, pairs = graph
    edges: dict[str, list[str]] = {}
    for a, b in pairs:
        edges.setdefault(nodes[a], []).append(nodes[b])
    comps = strongly_connected(nodes, edges)
    assert sorted(x for c in comps for x in c) == sorted(nodes)
    reach = {n: _reach(edges, n) for n in nodes}
    for comp in comps:
        for n in nodes:
            mutual = n in reach[comp[0]] and comp[0] in reach[n]
            assert mutual == (n in comp)


def test_fingerprint_tracks_closure(mini):
    g = deserialize_model(serialize_model(mini))
    nested, default = "page:Nested.aspx#", "page:Default.aspx#"
    before = {e: subgraph_fingerprint(g, e) for e in (nested, default, "usercontrol:Controls/Header.ascx#")}
    g.elements["resourcestring:Labels#Name"].props["value.default"] = "Renamed"
    assert subgraph_fingerprint(g, nested) != before[nested]
    assert subgraph_fingerprint(g, default) == before[default]
    g.elements["componentuse:Controls/Header.ascx#1:asp:TextBox"].props["MaxLength"] = "9"
    uc = "usercontrol:Controls/Header.ascx#"
    assert subgraph_fingerprint(g, uc) != before[uc]
    with pytest.raises(MigrationError):
        subgraph_fingerprint(g, "page:Nope.aspx#")


@settings(max_examples=20, deadline=None)
@given(st.randoms(use_true_random=False))
def test_fingerprint_ignores_relation_order(mini, rnd):
    g = deserialize_model(serialize_model(mini))
    rnd.shuffle(g.relations)
    for eid in ("page:Nested.aspx#", PANEL):
        assert subgraph_fingerprint(g, eid) == subgraph_fingerprint(mini, eid)


def test_low_confidence_round_trips(mini):
    g = deserialize_model(serialize_model(mini))
    g.elements["page:Default.aspx#"].confidence = Confidence.LOW
    assert deserialize_model(serialize_model(g)).elements["page:Default.aspx#"].confidence is Confidence.LOW
