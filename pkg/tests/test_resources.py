"""
Tests for merging graphs, the contraction heuristic and star-cluster costs
"""
import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from models.config import EncodingParams, ModelConfig
from services.bsm_model import lattice_event_probs
from services.errors import (
    InfiniteCostError,
    ParameterError,
    UnsupportedCombinationError,
    UsageError,
)
from services.graph_states import HConfig, MicroclusterKind, decompose_components
from services.resources import (
    EXTERNAL,
    INTERNAL,
    CostEstimate,
    CostQuery,
    MergingGraph,
    build_merging_graph,
    combine_star_cost,
    combined_merging_graph,
    contraction_cost,
    estimate_microcluster_cost,
    exhaustive_min_cost,
    fusion_sum,
    merging_choice_space,
    replay_merging_graph,
    resource_row,
    star_cluster_cost,
    step1_success_probability,
)

SPIDER = nx.Graph([("c", "a"), ("c", "b"), ("c", "e"), ("a", "a2"), ("b", "b2"), ("e", "e2")])


def _weighted(edges, nodes=None):
    g = nx.MultiGraph()
    for v in nodes or []:
        g.add_node(v, weight=1.0)
    for u, v in edges:
        g.add_node(u, weight=1.0)
        g.add_node(v, weight=1.0)
        g.add_edge(u, v, kind=EXTERNAL)
    return MergingGraph(g)


def test_fusion_sum_values():
    assert fusion_sum(1, 1, 0.0) == 4.0
    assert fusion_sum(1, 1, 0.1) == pytest.approx(4 / 0.81, abs=1e-12)


def test_fusion_sum_is_not_associative():
    assert fusion_sum(fusion_sum(1, 2, 0.0), 3, 0.0) == 18.0
    assert fusion_sum(1, fusion_sum(2, 3, 0.0), 0.0) == 22.0


def test_fusion_sum_errors():
    with pytest.raises(InfiniteCostError):
        fusion_sum(1, 1, 1.0)
    with pytest.raises(ParameterError):
        fusion_sum(0.5, 1, 0.0)


@given(
    st.floats(1, 100), st.floats(1, 100), st.floats(1, 100),
    st.floats(0, 0.5),
)
def test_fusion_sum_properties(a, b, c, eta):
    assert fusion_sum(a, b, eta) == fusion_sum(b, a, eta)
    assert fusion_sum(a + 1, b, eta) > fusion_sum(a, b, eta)
    lo, mid, hi = sorted((a, b, c))
    left = fusion_sum(fusion_sum(lo, mid, eta), hi, eta)
    right = fusion_sum(lo, fusion_sum(mid, hi, eta), eta)
    assert left <= right * (1 + 1e-12)


def test_three_vertex_path_is_one_ghz_state():
    mg = build_merging_graph(nx.path_graph(["a", "b", "c"]), np.random.default_rng(0))
    assert list(mg.graph.nodes) == ["b"]
    assert mg.graph.number_of_edges() == 0
    assert mg.v_root == {"b": "b"}
    assert mg.leaf_host == {"a": "b", "c": "b"}


def test_star_splits_into_two_ghz_states():
    g = nx.star_graph(3)
    mg = build_merging_graph(g, np.random.default_rng(1))
    assert mg.num_vertices() == 2
    assert len(mg.edges_of_kind(INTERNAL)) == 1
    assert mg.edges_of_kind(EXTERNAL) == []
    assert set(mg.leaf_host) == {1, 2, 3}
    assert mg.v_root[0] in mg.graph


def test_single_degree_three_vertex():
    mg = build_merging_graph(SPIDER, np.random.default_rng(2))
    assert mg.num_vertices() == 5
    assert len(mg.edges_of_kind(INTERNAL)) == 1
    assert len(mg.edges_of_kind(EXTERNAL)) == 3
    assert set(mg.leaf_host) == {"a2", "b2", "e2"}
    perm, root = mg.choices["c"]
    assert sorted(perm) == [0, 1, 2]
    assert root in (0, 1)


def test_too_small_or_disconnected_graph_is_rejected():
    rng = np.random.default_rng(3)
    with pytest.raises(UsageError):
        build_merging_graph(nx.path_graph(2), rng)
    with pytest.raises(UsageError):
        build_merging_graph(nx.Graph([(0, 1), (1, 2), (3, 4), (4, 5)]), rng)


def _random_connected(seed, size):
    while True:
        g = nx.gnp_random_graph(size, 0.5, seed=seed)
        if nx.is_connected(g):
            return g
        seed += 1_000_003


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 7))
def test_merging_graph_shape(seed, size):
    g = _random_connected(seed, size)
    mg = build_merging_graph(g, np.random.default_rng(seed))
    expected = sum(d - 1 for _, d in g.degree if d >= 3) + sum(1 for _, d in g.degree if d == 2)
    assert mg.num_vertices() == expected
    assert all(d <= 3 for _, d in mg.graph.degree)
    assert all(mg.weight(v) == 1.0 for v in mg.graph)
    assert set(mg.v_root) | set(mg.leaf_host) == set(g.nodes)
    for u, v, data in mg.edges_of_kind(INTERNAL):
        assert data["root_end"] in (u, v)
    # every split vertex gives away all roots but one
    givers = [data["root_end"] for _, _, data in mg.edges_of_kind(INTERNAL)]
    assert len(givers) == len(set(givers))
    assert not set(givers) & set(mg.v_root.values())


REPLAY_GRAPHS = [
    nx.path_graph(4),
    nx.path_graph(5),
    nx.star_graph(3),
    nx.star_graph(4),
    nx.cycle_graph(4),
    nx.complete_graph(4),
    SPIDER,
    nx.Graph([(0, 1), (1, 2), (2, 0), (2, 3)]),
]


@pytest.mark.parametrize("index", range(len(REPLAY_GRAPHS)))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_replay_rebuilds_the_graph(index, seed):
    g = REPLAY_GRAPHS[index]
    rng = np.random.default_rng(seed)
    mg = build_merging_graph(g, rng)
    rebuilt = replay_merging_graph(mg, rng)
    assert rebuilt is not None
    assert {frozenset(e) for e in rebuilt.edges} == {frozenset(e) for e in g.edges}


def test_replay_over_every_choice_of_a_degree_four_vertex():
    g = nx.star_graph(4)
    rng = np.random.default_rng(4)
    for choices in merging_choice_space(g):
        rebuilt = replay_merging_graph(build_merging_graph(g, choices=choices), rng)
        assert {frozenset(e) for e in rebuilt.edges} == {frozenset(e) for e in g.edges}


def test_choice_space_size():
    assert len(list(merging_choice_space(nx.star_graph(3)))) == 6 * 2
    assert len(list(merging_choice_space(nx.path_graph(5)))) == 1


def test_contraction_of_single_vertex():
    assert contraction_cost(_weighted([], nodes=["a"]), 0.0, np.random.default_rng(0)) == 1.0


def test_contraction_of_single_edge():
    assert contraction_cost(_weighted([("a", "b")]), 0.0, np.random.default_rng(0)) == 4.0


def test_contraction_of_four_vertex_path():
    mg = _weighted([(0, 1), (1, 2), (2, 3)])
    assert contraction_cost(mg, 0.0, np.random.default_rng(0)) == 16.0
    assert exhaustive_min_cost(mg, 0.0) == 16.0


def test_contraction_keeps_loops_out_of_merging():
    mg = _weighted([(0, 1), (1, 2), (2, 0)])
    assert contraction_cost(mg, 0.0, np.random.default_rng(0)) == 10.0
    assert exhaustive_min_cost(mg, 0.0) == 10.0


def test_contraction_of_disconnected_graph_fails():
    with pytest.raises(UsageError):
        contraction_cost(_weighted([(0, 1), (2, 3)]), 0.0, np.random.default_rng(0))


def test_contraction_does_not_modify_input():
    mg = _weighted([(0, 1), (1, 2)])
    contraction_cost(mg, 0.0, np.random.default_rng(0))
    assert mg.num_vertices() == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 6), st.floats(0, 0.2))
def test_contraction_bounds(seed, size, eta):
    g = _random_connected(seed, size)
    mg = build_merging_graph(g, np.random.default_rng(seed))
    cost = contraction_cost(mg, eta, np.random.default_rng(seed))
    if mg.num_vertices() == 1:
        assert cost == 1.0
    else:
        assert cost > mg.num_vertices()
    if mg.num_vertices() <= 5:
        assert exhaustive_min_cost(mg, eta) <= cost * (1 + 1e-12)


def test_unencoded_microclusters_cost_one_state():
    rng = np.random.default_rng(5)
    for kind in MicroclusterKind:
        estimate = estimate_microcluster_cost(CostQuery(kind, HConfig.HIC, None, 0.05), rng)
        assert estimate.cost == 1.0
        assert estimate.samples == 1200


def test_estimate_is_deterministic():
    query = CostQuery(MicroclusterKind.SIDE, HConfig.HIC, EncodingParams(2, 2, 1), 0.0)
    first = estimate_microcluster_cost(query, np.random.default_rng(6), initial=40)
    second = estimate_microcluster_cost(query, np.random.default_rng(6), initial=40)
    assert first == second


@pytest.mark.parametrize("kind", list(MicroclusterKind))
@pytest.mark.parametrize("config", list(HConfig))
@pytest.mark.parametrize("n,m", [(1, 2), (2, 1), (2, 2), (2, 3), (3, 2)])
def test_encoded_microclusters_have_finite_cost(kind, config, n, m):
    query = CostQuery(kind, config, EncodingParams(n, m, 0), 0.01)
    estimate = estimate_microcluster_cost(query, np.random.default_rng(7), initial=20)
    vertices = query.graph().num_vertices()
    assert 1.0 <= estimate.cost < math.inf
    assert estimate.cost >= vertices / 3


def test_small_side_microcluster_matches_full_enumeration():
    query = CostQuery(MicroclusterKind.SIDE, HConfig.HIC, EncodingParams(1, 2, 0), 0.0)
    estimate = estimate_microcluster_cost(query, np.random.default_rng(8))

    components = decompose_components(query.graph())
    spaces = [list(merging_choice_space(comp)) for comp in components.components]
    best = math.inf
    for combo in itertools.product(*spaces):
        combined = combined_merging_graph(components, choices=list(combo))
        for seed in range(10):
            best = min(best, contraction_cost(combined, 0.0, np.random.default_rng(seed)))
    assert estimate.cost == best


def test_star_cost_unencoded_without_post_selection():
    assert star_cluster_cost(ModelConfig(eta=0.05)) == 3.0


def test_star_cost_unencoded_with_post_selection():
    assert star_cluster_cost(ModelConfig(pssl=True, p_fail=0.5, eta=0.0)) == pytest.approx(10.0, abs=1e-12)
    eta = 0.05
    expected = 2 * (4 + (1 - eta) ** 2) / (1 - eta) ** 4
    assert star_cluster_cost(ModelConfig(pssl=True, p_fail=0.5, eta=eta)) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(12.038, abs=1e-3)


def test_step1_success_for_encoded_pnrd():
    cfg = ModelConfig(encoding=True, pssl=True, enc_params=EncodingParams(2, 2, 1), eta=0.02)
    assert step1_success_probability(cfg) == lattice_event_probs(cfg.enc_params, cfg.loss).P_S


def test_encoded_onoff_post_selection_is_unsupported():
    cfg = ModelConfig(encoding=True, pssl=True, pnrd=False, enc_params=EncodingParams(2, 2, 1))
    with pytest.raises(UnsupportedCombinationError):
        star_cluster_cost(cfg)


def test_combine_star_cost():
    assert combine_star_cost(5.0, 7.0, 0.3, pssl=False) == 19.0
    assert combine_star_cost(5.0, 7.0, 0.5, pssl=True) == pytest.approx(((12 / 0.5) + 7) / 0.5)
    with pytest.raises(InfiniteCostError):
        combine_star_cost(1.0, 1.0, 0.0, pssl=True)


def test_resource_row_fields():
    row = resource_row(ModelConfig(pssl=True, p_fail=0.5, eta=0.0))
    assert row.n is None and row.m is None
    assert row.config == "hic"
    assert row.detector == "pnrd"
    assert row.n_central == row.n_side == 1.0
    assert row.p_succ_step1 == 0.5
    assert row.samples == 2400


def test_resource_row_echoes_its_scenario(monkeypatch):
    monkeypatch.setattr("services.resources.build_id", lambda: "v2.1")
    monkeypatch.setattr("services.resources.estimate_microcluster_cost", lambda query, rng: CostEstimate(3.0, 40))
    cfg = ModelConfig(encoding=True, enc_params=EncodingParams(2, 2, 1), pssl=True, p_fail=0.5, eta=0.0, seed=11, d=5)
    row = resource_row(cfg)
    assert (row.n, row.m, row.j) == (2, 2, 1)
    assert row.build_id == "v2.1"
    assert row.config_echo == cfg.to_dict()
    assert row.config_echo["seed"] == 11
    assert row.config_echo["d"] == 5
