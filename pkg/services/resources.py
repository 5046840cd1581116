"""
Expected 3-GHZ state cost of microclusters and star clusters

A microcluster is assembled from 3-GHZ states along a merging graph: internal
edges are BSMs that grow one GHZ state, external edges are fusions between
leaf qubits. The cost of merging two independently prepared states follows the
fusion-sum N1 +_f N2 = 2(N1 + N2) / (1 - eta)^2.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterator, List, Optional, Tuple

import networkx as nx
import numpy as np

from models.config import EncodingParams, ModelConfig
from models.results import ResourceRow
from services.bsm_model import lattice_event_probs
from services.errors import (
    InfiniteCostError,
    ParameterError,
    UnsupportedCombinationError,
    UsageError,
    check_probability,
)
from services.graph_states import (
    ComponentSet,
    HConfig,
    MicroclusterKind,
    PhysGraph,
    decompose_components,
    microcluster_graph,
)
from services.provenance import build_id
from services.stabilizer_oracle import StabilizerState

logger = logging.getLogger(__name__)

INTERNAL = "internal"
EXTERNAL = "external"

INITIAL_SAMPLES = 1200
MAX_SAMPLES = INITIAL_SAMPLES * 64
COST_RTOL = 1e-12

# per split vertex: (permutation of its current neighbours, index of the root in V_new)
Choice = Tuple[Tuple[int, ...], int]


def fusion_sum(n1: float, n2: float, eta: float) -> float:
    """Expected 3-GHZ cost of fusing two states that cost n1 and n2"""
    eta = check_probability(eta, "eta")
    if n1 < 1 or n2 < 1:
        raise ParameterError(f"costs must be at least 1, got {n1} and {n2}")
    if eta >= 1.0:
        raise InfiniteCostError("fusions never succeed at eta = 1")
    return 2.0 * (n1 + n2) / (1.0 - eta) ** 2


@dataclass
class MergingGraph:
    """
    3-GHZ states (vertices, weight N_v) and the merging operations between them

    Edges carry `kind` (internal BSM or external fusion); internal edges also
    record `root_end`, the vertex whose root qubit the BSM consumes.
    """
    graph: nx.MultiGraph
    v_root: Dict[Hashable, Hashable] = field(default_factory=dict)
    leaf_host: Dict[Hashable, Hashable] = field(default_factory=dict)
    choices: Dict[Hashable, Choice] = field(default_factory=dict)

    def num_vertices(self) -> int:
        return self.graph.number_of_nodes()

    def edges_of_kind(self, kind: str) -> List[Tuple]:
        return [(u, v, data) for u, v, data in self.graph.edges(data=True) if data["kind"] == kind]

    def weight(self, v: Hashable) -> float:
        return self.graph.nodes[v]["weight"]

    def host(self, v: Hashable) -> Hashable:
        """3-GHZ state holding the qubit of physical vertex v"""
        if v in self.v_root:
            return self.v_root[v]
        if v in self.leaf_host:
            return self.leaf_host[v]
        raise UsageError(f"vertex {v!r} is not part of this merging graph")


def _order_key(v):
    return tuple(str(part) for part in v) if isinstance(v, tuple) else (str(v),)


def _as_nx(g) -> nx.Graph:
    return g.graph if isinstance(g, PhysGraph) else g


def build_merging_graph(g, rng: Optional[np.random.Generator] = None,
                        choices: Optional[Dict[Hashable, Choice]] = None) -> MergingGraph:
    """
    Merging graph of a connected physical-level graph

    Every vertex of degree d >= 3 is replaced by a path of d - 1 new vertices;
    one of them becomes the root that carries the vertex's own qubit, the others
    take one neighbour each and the path ends take the last two. Degree-1
    vertices are then dropped: their qubit is a spare leaf of the neighbour.

    Args:
        g: PhysGraph or networkx graph with at least three vertices
        rng: draws the neighbour order and root of each split vertex
        choices: fixed (permutation, root index) per split vertex instead of rng

    Returns:
        MergingGraph with the choices that identify it
    """
    graph = _as_nx(g)
    if graph.number_of_nodes() < 3 or not nx.is_connected(graph):
        raise UsageError("a merging graph needs a connected graph with at least three vertices")
    if rng is None and choices is None:
        raise UsageError("either rng or choices is required")

    nodes = sorted(graph.nodes, key=_order_key)
    mg = nx.MultiGraph()
    for v in nodes:
        mg.add_node(v, weight=1.0)
    for u, v in sorted(graph.edges, key=lambda e: sorted((_order_key(e[0]), _order_key(e[1])))):
        mg.add_edge(u, v, kind=EXTERNAL)

    v_root = {v: v for v in nodes if graph.degree(v) == 2}
    made: Dict[Hashable, Choice] = {}
    for v in [v for v in nodes if graph.degree(v) >= 3]:
        current = list(mg.neighbors(v))
        d = len(current)
        if choices is not None and v in choices:
            perm, r = choices[v]
        else:
            perm, r = tuple(int(k) for k in rng.permutation(d)), int(rng.integers(d - 1))
        order = [current[k] for k in perm]
        new = [("ghz", v, i) for i in range(d - 1)]

        mg.remove_node(v)
        for w in new:
            mg.add_node(w, weight=1.0)
        for i in range(d - 2):
            mg.add_edge(new[i], new[i + 1], kind=INTERNAL, root_end=new[i] if i < r else new[i + 1])
        rest = [w for k, w in enumerate(new) if k != r]
        for i in range(d - 2):
            mg.add_edge(rest[i], order[i], kind=EXTERNAL)
        mg.add_edge(new[0], order[d - 2], kind=EXTERNAL)
        mg.add_edge(new[-1], order[d - 1], kind=EXTERNAL)
        v_root[v] = new[r]
        made[v] = (tuple(perm), r)

    leaf_host = {}
    for u in [u for u in mg.nodes if mg.degree(u) == 1]:
        leaf_host[u] = next(iter(mg.neighbors(u)))
    mg.remove_nodes_from(list(leaf_host))
    return MergingGraph(mg, v_root, leaf_host, made)


def merging_choice_space(g) -> Iterator[Dict[Hashable, Choice]]:
    """Every combination of neighbour orders and roots (small graphs only)"""
    graph = _as_nx(g)
    split = [v for v in sorted(graph.nodes, key=_order_key) if graph.degree(v) >= 3]
    per_vertex = [
        list(itertools.product(itertools.permutations(range(graph.degree(v))), range(graph.degree(v) - 1)))
        for v in split
    ]
    for combo in itertools.product(*per_vertex):
        yield dict(zip(split, combo))


def combined_merging_graph(components: ComponentSet, rng: Optional[np.random.Generator] = None,
                           choices: Optional[List[Dict[Hashable, Choice]]] = None) -> MergingGraph:
    """
    Disjoint union of component merging graphs joined by the inter-component fusions

    A fusion of physical vertices v1 and v2 connects v_root(v1) and v_root(v2).
    A fused vertex left with degree 1 is a spare leaf, so its host state is used.
    """
    if choices is None:
        choices = [None] * len(components.components)
    parts = [build_merging_graph(comp, rng, fixed) for comp, fixed in zip(components.components, choices)]
    combined = MergingGraph(nx.compose_all([p.graph for p in parts]))
    for p in parts:
        combined.v_root.update(p.v_root)
        combined.leaf_host.update(p.leaf_host)
        combined.choices.update(p.choices)
    for x, y in components.inter_component_fusions:
        combined.graph.add_edge(combined.host(x), combined.host(y), kind=EXTERNAL)
    return combined


def _mergeable_edges(g: nx.MultiGraph) -> List[Tuple]:
    return [(u, v, k) for u, v, k in g.edges(keys=True) if u != v]


def contraction_cost(combined: MergingGraph, eta: float, rng: np.random.Generator,
                     max_rounds: Optional[int] = None) -> float:
    """
    Cost of merging every 3-GHZ state of a merging graph by the greedy heuristic

    Each round takes the edges of smallest N_e, colours all edges greedily
    (largest-first on the line graph) and contracts the largest colour class
    of the cheapest edges, ties drawn from rng. Loops left by contractions stay
    in the graph but are never merged.

    Raises:
        UsageError: the graph is empty, disconnected or did not shrink to one vertex
    """
    g = nx.convert_node_labels_to_integers(combined.graph)
    if g.number_of_nodes() == 0:
        raise UsageError("empty merging graph")
    rounds = 0
    limit = max_rounds if max_rounds is not None else g.number_of_nodes()
    while g.number_of_nodes() > 1:
        rounds += 1
        if rounds > limit:
            raise UsageError(f"contraction did not finish within {limit} rounds")
        edges = _mergeable_edges(g)
        if not edges:
            raise UsageError("merging graph is disconnected")
        costs = {e: fusion_sum(g.nodes[e[0]]["weight"], g.nodes[e[1]]["weight"], eta) for e in edges}
        cheapest = min(costs.values())
        e_min = [e for e in edges if math.isclose(costs[e], cheapest, rel_tol=COST_RTOL)]

        plain = nx.MultiGraph()
        plain.add_nodes_from(g.nodes)
        plain.add_edges_from(edges)
        colors = nx.greedy_color(nx.line_graph(plain), strategy="largest_first")
        classes: Dict[int, List[Tuple]] = {}
        for u, v, k in e_min:
            key = (u, v, k) if (u, v, k) in colors else (v, u, k)
            classes.setdefault(colors[key], []).append((u, v, k))
        largest = max(len(c) for c in classes.values())
        tied = sorted(c for c, members in classes.items() if len(members) == largest)
        chosen = classes[tied[int(rng.integers(len(tied)))]]

        for u, v, k in chosen:
            weight = costs[(u, v, k)]
            g.remove_edge(u, v, key=k)
            nx.contracted_nodes(g, u, v, self_loops=True, copy=False)
            g.nodes[u].pop("contraction", None)
            g.nodes[u]["weight"] = weight
    (last,) = g.nodes
    return float(g.nodes[last]["weight"])


def exhaustive_min_cost(combined: MergingGraph, eta: float) -> float:
    """Minimum cost over every contraction order (tiny graphs only)"""
    g = nx.convert_node_labels_to_integers(combined.graph)
    if g.number_of_nodes() == 0:
        raise UsageError("empty merging graph")
    weights = tuple(g.nodes[v]["weight"] for v in g.nodes)
    pairs = frozenset(frozenset((u, v)) for u, v, _ in _mergeable_edges(g))
    groups = tuple(frozenset([v]) for v in g.nodes)

    def best(groups, weights) -> float:
        if len(groups) == 1:
            return weights[0]
        options = []
        for a, b in itertools.combinations(range(len(groups)), 2):
            if not any(p & groups[a] and p & groups[b] for p in pairs):
                continue
            merged = groups[a] | groups[b]
            rest = [k for k in range(len(groups)) if k not in (a, b)]
            options.append(best(
                tuple(groups[k] for k in rest) + (merged,),
                tuple(weights[k] for k in rest) + (fusion_sum(weights[a], weights[b], eta),),
            ))
        if not options:
            raise UsageError("merging graph is disconnected")
        return min(options)

    return best(groups, weights)


def replay_merging_graph(mg: MergingGraph, rng: np.random.Generator) -> Optional[nx.Graph]:
    """
    Rebuild the physical graph from 3-GHZ states by the BSMs and fusions of mg

    Each vertex holds a 3-GHZ state (root plus two Hadamard-marked leaves).
    Internal edges measure XX and ZZ on a root and a leaf, external edges
    measure XZ and ZX on two leaves, and spare leaves get a Hadamard.

    Returns:
        Graph over the physical vertex labels, or None when the result is not a graph state
    """
    ghz = PhysGraph()
    for w in mg.graph.nodes:
        root, leaves = (w, "root"), [(w, "leaf", 0), (w, "leaf", 1)]
        ghz.add_vertex(root, "root")
        for leaf in leaves:
            ghz.add_vertex(leaf, "leaf")
            ghz.add_edge(root, leaf)
            ghz.h_marks[leaf] += 1
    state = StabilizerState.from_graph(ghz)

    free_leaves = {w: [(w, "leaf", 0), (w, "leaf", 1)] for w in mg.graph.nodes}
    used_roots = set()
    measurements = []
    for u, v, data in mg.edges_of_kind(INTERNAL):
        giver = data["root_end"]
        taker = v if giver == u else u
        used_roots.add(giver)
        measurements.append(((giver, "root"), free_leaves[taker].pop(0), ("X", "X"), ("Z", "Z")))
    for u, v, _ in mg.edges_of_kind(EXTERNAL):
        measurements.append((free_leaves[u].pop(0), free_leaves[v].pop(0), ("X", "Z"), ("Z", "X")))
    for a, b, first, second in measurements:
        for pa, pb in (first, second):
            _, state = state.measure_pauli(state.pauli({a: pa, b: pb}), rng)

    label = {}
    for v, w in mg.v_root.items():
        label[(w, "root")] = v
    for u, w in sorted(mg.leaf_host.items(), key=lambda item: _order_key(item[0])):
        label[free_leaves[w].pop(0)] = u
    for w, leaves in free_leaves.items():
        if leaves:
            raise UsageError(f"3-GHZ state {w!r} has unassigned leaves")
    for q in label:
        if q[1] == "leaf":
            state.hadamard(q)

    reduced = state.reduced_graph(list(label))
    if reduced is None:
        return None
    return nx.relabel_nodes(reduced, label)


@dataclass
class CostQuery:
    """Microcluster whose expected 3-GHZ cost is estimated"""
    kind: MicroclusterKind
    config: HConfig
    params: Optional[EncodingParams]
    eta: float
    pssl: bool = False

    def graph(self) -> PhysGraph:
        # an unencoded microcluster is a 3-qubit path
        params = self.params if self.params is not None else EncodingParams(1, 1, 0)
        return microcluster_graph(self.kind, self.config, params)


@dataclass
class CostEstimate:
    cost: float
    samples: int


def estimate_microcluster_cost(query: CostQuery, rng: np.random.Generator,
                               initial: int = INITIAL_SAMPLES, max_samples: int = MAX_SAMPLES) -> CostEstimate:
    """
    Smallest sampled cost of a microcluster

    Draws `initial` random merging graphs; when the minimum over the first half
    differs from the minimum over all, the sample count is doubled until two
    successive minima agree.
    """
    check_probability(query.eta, "eta")
    components = decompose_components(query.graph())

    def draw(count: int) -> List[float]:
        return [contraction_cost(combined_merging_graph(components, rng), query.eta, rng) for _ in range(count)]

    samples = draw(initial)
    previous, current = min(samples[: initial // 2]), min(samples)
    while not math.isclose(previous, current, rel_tol=COST_RTOL):
        if len(samples) >= max_samples:
            logger.warning("cost of %s microcluster still moving after %d samples", query.kind.value, len(samples))
            break
        samples.extend(draw(len(samples)))
        previous, current = current, min(samples)
    logger.debug("%s microcluster cost %.6g from %d samples", query.kind.value, current, len(samples))
    return CostEstimate(current, len(samples))


def step1_success_probability(cfg: ModelConfig) -> float:
    """
    Success probability of a step-1 fusion

    Raises:
        UnsupportedCombinationError: encoded fusions with on-off detectors
    """
    if not cfg.encoding:
        return (1.0 - cfg.p_fail) * (1.0 - cfg.eta) ** 2
    if not cfg.pnrd:
        raise UnsupportedCombinationError("step-1 success rate is undefined for encoded fusions with on-off detectors")
    return lattice_event_probs(cfg.enc_params, cfg.loss, cfg.detector).P_S


def combine_star_cost(n_central: float, n_side: float, p_succ: float, pssl: bool) -> float:
    """3-GHZ states per central qubit from the microcluster costs"""
    if not pssl:
        return n_central + 2.0 * n_side
    if p_succ <= 0.0:
        raise InfiniteCostError("step-1 fusions never succeed")
    return ((n_central + n_side) / p_succ + n_side) / p_succ


def resource_row(cfg: ModelConfig, rng: Optional[np.random.Generator] = None) -> ResourceRow:
    """Microcluster costs, step-1 success probability and star-cluster cost of one scenario"""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if cfg.encoding and not cfg.pnrd and cfg.pssl:
        raise UnsupportedCombinationError("post-selected step-1 fusions need PNRDs when encoding is used")
    config = HConfig.HIC if cfg.hic else HConfig.HIS
    params = cfg.enc_params if cfg.encoding else None
    central = estimate_microcluster_cost(CostQuery(MicroclusterKind.CENTRAL, config, params, cfg.eta, cfg.pssl), rng)
    side = estimate_microcluster_cost(CostQuery(MicroclusterKind.SIDE, config, params, cfg.eta, cfg.pssl), rng)
    try:
        p_succ = step1_success_probability(cfg)
    except UnsupportedCombinationError:
        p_succ = math.nan
    n_star = combine_star_cost(central.cost, side.cost, p_succ, cfg.pssl)
    logger.info("star cluster cost %.6g (central %.6g, side %.6g)", n_star, central.cost, side.cost)
    return ResourceRow(
        n=params.n if params else None,
        m=params.m if params else None,
        config=config.value,
        detector=cfg.detector.value,
        pssl=cfg.pssl,
        eta=cfg.eta,
        n_central=central.cost,
        n_side=side.cost,
        p_succ_step1=p_succ,
        n_ghz_star=n_star,
        samples=central.samples + side.samples,
        j=params.j if params else None,
        config_echo=cfg.to_dict(),
        build_id=build_id(),
    )


def star_cluster_cost(cfg: ModelConfig, rng: Optional[np.random.Generator] = None) -> float:
    """Expected number of 3-GHZ states per central qubit"""
    return resource_row(cfg, rng).n_ghz_star
