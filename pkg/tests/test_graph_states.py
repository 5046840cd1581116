"""
Tests for microcluster graph templates, H/CZ rules and component decomposition
"""
import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from models.config import EncodingParams
from services.errors import UsageError
from services.graph_states import (
    ComponentSet,
    HConfig,
    MicroclusterKind,
    PhysGraph,
    apply_cz,
    apply_h,
    decompose_components,
    encoded_qubit_graph,
    h_then_cz_transform,
    merge_components,
    microcluster_graph,
)

CENTRAL = MicroclusterKind.CENTRAL
SIDE = MicroclusterKind.SIDE


def _graph(edges, nodes=()):
    g = PhysGraph()
    for v in nodes:
        g.add_vertex(v, "test")
    for u, v in edges:
        g.add_vertex(u, "test")
        g.add_vertex(v, "test")
        g.add_edge(u, v)
    return g


def test_single_photon_microclusters():
    params = EncodingParams(1, 1, 0)
    for config in HConfig:
        assert microcluster_graph(CENTRAL, config, params).num_vertices() == 3
        assert microcluster_graph(SIDE, config, params).num_vertices() == 3


@pytest.mark.parametrize("n", range(1, 6))
@pytest.mark.parametrize("m", range(1, 6))
@pytest.mark.parametrize("config", list(HConfig))
def test_microcluster_vertex_counts(n, m, config):
    params = EncodingParams(n, m, 0)
    central = microcluster_graph(CENTRAL, config, params)
    side = microcluster_graph(SIDE, config, params)
    assert central.num_vertices() == 2 * n * m + 1
    assert side.num_vertices() == 3 * n * m
    assert nx.number_of_selfloops(central.graph) == 0
    assert nx.is_connected(central.graph)
    assert nx.is_connected(side.graph)


def test_unencoded_central_role():
    g = microcluster_graph(CENTRAL, HConfig.HIC, EncodingParams(2, 2, 1))
    assert g.graph.nodes[("B", 0, 0)]["role"] == "central-unencoded"
    assert g.neighbors(("B", 0, 0)) == {("A", 1, 1), ("A", 2, 1), ("C", 1, 1), ("C", 2, 1)}


def test_side_his_keeps_lattice_mark_on_left_qubit():
    g = microcluster_graph(SIDE, HConfig.HIS, EncodingParams(2, 2, 1))
    assert g.lattice_h_marks == {"L"}
    assert microcluster_graph(SIDE, HConfig.HIC, EncodingParams(2, 2, 1)).lattice_h_marks == set()


def test_plus_state_template():
    g, attach = encoded_qubit_graph(EncodingParams(2, 2, 0))
    assert attach == [("Q", 1, 1), ("Q", 1, 2)]
    assert g.edge_set() == {
        frozenset({("Q", 1, 1), ("Q", 2, 1)}),
        frozenset({("Q", 1, 2), ("Q", 2, 1)}),
        frozenset({("Q", 2, 1), ("Q", 2, 2)}),
    }
    assert g.marked == {("Q", 2, 1)}


def test_h_then_cz_on_path_end():
    g = _graph([("a", "b")], nodes=["c"])
    out = h_then_cz_transform(g, "a", "c")
    assert out.edge_set() == {frozenset({"a", "b"}), frozenset({"b", "c"})}
    assert out.marked == {"a"}
    assert g.edge_set() == {frozenset({"a", "b"})}


def test_h_then_cz_isolated_vertex():
    g = _graph([("b", "c")], nodes=["a"])
    out = h_then_cz_transform(g, "a", "c")
    assert out.edge_set() == g.edge_set()
    assert out.marked == {"a"}


def test_h_then_cz_rejects_adjacent_pair():
    with pytest.raises(UsageError):
        h_then_cz_transform(_graph([("a", "b")]), "a", "b")


@settings(max_examples=50)
@given(st.integers(0, 10_000))
def test_h_then_cz_twice_restores_edges(seed):
    base = nx.gnp_random_graph(7, 0.4, seed=seed)
    g = PhysGraph()
    for v in base.nodes:
        g.add_vertex(v, "test")
    for u, v in base.edges:
        g.add_edge(u, v)
    pairs = [(u, v) for u in base.nodes for v in base.nodes if u != v and not base.has_edge(u, v)]
    if not pairs:
        return
    h, c = pairs[seed % len(pairs)]
    twice = h_then_cz_transform(h_then_cz_transform(g, h, c), h, c)
    assert twice.edge_set() == g.edge_set()
    assert twice.h_marks[h] == 2
    assert not twice.is_marked(h)


def test_cz_replay_matches_transform():
    g = _graph([("a", "b")], nodes=["c"])
    replayed = apply_cz(apply_h(g.copy(), "a"), "a", "c")
    assert replayed.edge_set() == h_then_cz_transform(g, "a", "c").edge_set()


def test_cz_between_marked_vertices_is_rejected():
    g = _graph([], nodes=["a", "b"])
    apply_h(g, "a")
    apply_h(g, "b")
    with pytest.raises(UsageError):
        apply_cz(g, "a", "b")


def test_no_repetitive_structure_single_component():
    g = _graph([("a", "b"), ("b", "c"), ("c", "d")])
    parts = decompose_components(g)
    assert len(parts.components) == 1
    assert parts.inter_component_fusions == []


def test_structure_attached_to_two_vertices():
    g = _graph([(r, u) for r in ("r1", "r2", "r3") for u in ("u", "v")])
    parts = decompose_components(g)
    assert len(parts.components) == 2
    assert len(parts.inter_component_fusions) == 1
    assert parts.total_vertices() == g.num_vertices() + 2


@pytest.mark.parametrize("n,m", [(1, 1), (2, 2), (3, 2), (2, 4)])
def test_central_hic_is_not_split(n, m):
    parts = decompose_components(microcluster_graph(CENTRAL, HConfig.HIC, EncodingParams(n, m, 0)))
    assert len(parts.components) == 1
    assert parts.inter_component_fusions == []


@pytest.mark.parametrize("kind", [CENTRAL, SIDE])
@pytest.mark.parametrize("config", list(HConfig))
@pytest.mark.parametrize("n,m", [(1, 2), (2, 2), (2, 3), (3, 3)])
def test_decompose_then_merge_is_isomorphic(kind, config, n, m):
    g = microcluster_graph(kind, config, EncodingParams(n, m, 0))
    parts = decompose_components(g)
    assert parts.total_vertices() == g.num_vertices() + 2 * len(parts.inter_component_fusions)
    for comp in parts.components:
        assert nx.is_connected(comp.graph)
    merged = merge_components(parts)
    assert nx.is_isomorphic(merged.graph, g.graph)
    assert merged.marked == g.marked


def test_merge_of_plain_fusion():
    parts = ComponentSet(
        [_graph([("x", "a")]), _graph([("y", "b"), ("y", "c")])],
        [("x", "y")],
    )
    merged = merge_components(parts)
    assert merged.edge_set() == {frozenset({"a", "b"}), frozenset({"a", "c"})}


def test_export_adjacency_format():
    g = microcluster_graph(SIDE, HConfig.HIS, EncodingParams(1, 1, 0))
    lines = g.export_adjacency().splitlines()
    assert lines[0].split("\t") == ["L.1.1", "L[1,1]", "-", "M.1.1"]
    assert lines[1].split("\t") == ["M.1.1", "M[1,1]", "H", "L.1.1 R.1.1"]
    assert lines[-1] == "# lattice-level H: L"
    assert nx.get_node_attributes(g.to_networkx(), "h_mark")[("M", 1, 1)] is True
