import json

import pytest
from hypothesis import given, settings, strategies as st

from ddflow.cpg import Cpg, CpgError, EdgeKind, IngestError, NodeKind, load_cpg, serialize_cpg
from conftest import find


def test_add_method_and_lookup():
    cpg = Cpg()
    mid = cpg.add_node(NodeKind.Method, full_name="foo")
    assert mid == 1
    assert cpg.method_index["foo"] == 1


def test_node_ids_are_fresh():
    cpg = Cpg()
    a = cpg.add_node(NodeKind.Call, code="u.transform(v)")
    b = cpg.add_node(NodeKind.Call, code="u.transform(v)")
    assert a != b and b == a + 1


def test_duplicate_method_full_name_rejected():
    cpg = Cpg()
    cpg.add_node(NodeKind.Method, full_name="foo")
    with pytest.raises(CpgError):
        cpg.add_node(NodeKind.Method, full_name="foo")
    with pytest.raises(CpgError):
        cpg.add_node(NodeKind.ExternalMethodStub, full_name="foo")


def test_full_name_only_on_methods():
    with pytest.raises(CpgError):
        Cpg().add_node(NodeKind.Call, full_name="x")


def test_ddg_edge_needs_label():
    cpg = Cpg()
    a, b = cpg.add_node(NodeKind.Identifier), cpg.add_node(NodeKind.Identifier)
    with pytest.raises(CpgError):
        cpg.add_edge(a, b, EdgeKind.DDG)
    cpg.add_edge(a, b, EdgeKind.DDG, "u")
    assert cpg.out_neighbors(a, EdgeKind.DDG) == [b]
    assert cpg.ddg_labels(a, b) == ["u"]


def test_cfg_self_loop_visible_once():
    cpg = Cpg()
    a = cpg.add_node(NodeKind.Identifier)
    cpg.add_edge(a, a, EdgeKind.CFG)
    cpg.add_edge(a, a, EdgeKind.CFG)
    assert cpg.out_neighbors(a, EdgeKind.CFG) == [a]
    assert len(list(cpg.edges_of(EdgeKind.CFG))) == 1


def test_call_edge_must_target_method():
    cpg = Cpg()
    c = cpg.add_node(NodeKind.Call)
    i = cpg.add_node(NodeKind.Identifier)
    with pytest.raises(CpgError):
        cpg.add_edge(c, i, EdgeKind.CALL)


def test_argument_indices_unique_per_call():
    cpg = Cpg()
    c = cpg.add_node(NodeKind.Call)
    a = cpg.add_node(NodeKind.Identifier, argument_index=1)
    b = cpg.add_node(NodeKind.Identifier, argument_index=1)
    cpg.add_edge(c, a, EdgeKind.ARGUMENT)
    with pytest.raises(CpgError):
        cpg.add_edge(c, b, EdgeKind.ARGUMENT)


def test_edges_need_existing_endpoints():
    cpg = Cpg()
    a = cpg.add_node(NodeKind.Identifier)
    with pytest.raises(CpgError):
        cpg.add_edge(a, 99, EdgeKind.AST)
    with pytest.raises(CpgError):
        cpg.out_neighbors(99, EdgeKind.AST)


def test_isolated_node_has_no_ddg_neighbours():
    cpg = Cpg()
    a = cpg.add_node(NodeKind.Literal)
    assert cpg.out_neighbors(a, EdgeKind.DDG) == []
    assert cpg.in_neighbors(a, EdgeKind.DDG) == []


def test_listing1_def_of_u_reaches_receiver(listing1):
    u_def = find(listing1, "Identifier", "u", "foo", 0)
    u_use = find(listing1, "Identifier", "u", "foo", 1)
    assert listing1.out_neighbors(u_def, EdgeKind.DDG) == [u_use]
    assert listing1.nodes[u_use].argument_index == 0


@st.composite
def random_graphs(draw):
    n = draw(st.integers(1, 15))
    edges = draw(st.lists(st.tuples(st.integers(1, n), st.integers(1, n),
                                    st.sampled_from([EdgeKind.AST, EdgeKind.CFG, EdgeKind.CDG, EdgeKind.DDG])),
                          max_size=40))
    cpg = Cpg()
    for _ in range(n):
        cpg.add_node(NodeKind.Identifier, name="v")
    for s, d, k in edges:
        cpg.add_edge(s, d, k, "v" if k is EdgeKind.DDG else None)
    return cpg


@given(random_graphs())
@settings(max_examples=100, deadline=None)
def test_in_is_transpose_of_out(cpg):
    for kind in EdgeKind:
        for n in cpg.nodes:
            for m in cpg.out_neighbors(n, kind):
                assert n in cpg.in_neighbors(m, kind)
            for m in cpg.in_neighbors(n, kind):
                assert n in cpg.out_neighbors(m, kind)


@given(random_graphs())
@settings(max_examples=50, deadline=None)
def test_round_trip_random(cpg):
    again = load_cpg(serialize_cpg(cpg))
    assert again.nodes == cpg.nodes
    assert set(again.edges) == set(cpg.edges)


def test_round_trip_listing1(listing1):
    again = load_cpg(serialize_cpg(listing1))
    assert len(again) == len(listing1)
    labels = lambda g: sorted((e.src, e.dst, e.variable) for e in g.edges_of(EdgeKind.DDG))
    assert labels(again) == labels(listing1)
    assert serialize_cpg(again) == serialize_cpg(listing1)


def test_empty_document():
    assert len(load_cpg(b'{"nodes": [], "edges": []}')) == 0


def test_dangling_edge():
    doc = {"nodes": [{"id": 1, "kind": "Identifier"}], "edges": [{"src": 1, "dst": 999, "kind": "AST"}]}
    with pytest.raises(IngestError, match="dangling edge"):
        load_cpg(json.dumps(doc))


@pytest.mark.parametrize("doc", [
    "not json",
    {"nodes": [{"id": 1, "kind": "Bogus"}], "edges": []},
    {"nodes": [{"id": 1}], "edges": []},
    {"nodes": [{"id": 1, "kind": "Identifier"}], "edges": [{"src": 1, "dst": 1, "kind": "DDG"}]},
    {"nodes": [{"id": 1, "kind": "Identifier"}], "edges": [{"src": 1, "dst": 1, "kind": "AST", "variable": "x"}]},
])
def test_ingest_errors(doc):
    with pytest.raises(IngestError):
        load_cpg(doc if isinstance(doc, str) else json.dumps(doc))
