"""
Physical-level graphs of post-H microclusters and their decomposition into components
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Hashable, Iterable, List, Set, Tuple

import networkx as nx

from models.config import EncodingParams
from services.errors import UsageError

logger = logging.getLogger(__name__)

CENTRAL_UNENCODED = "central-unencoded"
FUSION_ROLE = "fusion"


class MicroclusterKind(Enum):
    CENTRAL = "central"
    SIDE = "side"


class HConfig(Enum):
    """Where step-1 fusion Hadamards act"""
    HIC = "hic"
    HIS = "his"


@dataclass
class PhysGraph:
    """
    Simple graph of photons with physical-level Hadamard marks

    Vertex ids are (lattice qubit label, block i, photon j); the unencoded central
    qubit is ("B", 0, 0). A vertex is marked when its Hadamard count is odd.
    """
    graph: nx.Graph = field(default_factory=nx.Graph)
    h_marks: Counter = field(default_factory=Counter)
    lattice_h_marks: Set[str] = field(default_factory=set)

    def add_vertex(self, v: Hashable, role: str) -> None:
        self.graph.add_node(v, role=role)

    def add_edge(self, u: Hashable, v: Hashable) -> None:
        if u == v:
            raise UsageError(f"loop on {u!r}")
        self.graph.add_edge(u, v)

    def toggle_edge(self, u: Hashable, v: Hashable) -> None:
        if self.graph.has_edge(u, v):
            self.graph.remove_edge(u, v)
        else:
            self.add_edge(u, v)

    def is_marked(self, v: Hashable) -> bool:
        return self.h_marks[v] % 2 == 1

    @property
    def marked(self) -> Set[Hashable]:
        return {v for v, count in self.h_marks.items() if count % 2 == 1}

    def neighbors(self, v: Hashable) -> Set[Hashable]:
        return set(self.graph.neighbors(v))

    def num_vertices(self) -> int:
        return self.graph.number_of_nodes()

    def edge_set(self) -> Set[frozenset]:
        return {frozenset(e) for e in self.graph.edges()}

    def copy(self) -> 'PhysGraph':
        return PhysGraph(self.graph.copy(), Counter(self.h_marks), set(self.lattice_h_marks))

    def to_networkx(self) -> nx.Graph:
        """Copy of the graph with `role` and `h_mark` node attributes"""
        g = self.graph.copy()
        for v in g.nodes:
            g.nodes[v]["h_mark"] = self.is_marked(v)
        return g

    def export_adjacency(self) -> str:
        """
        Adjacency-list text, one line per vertex:

            <id> <TAB> <role> <TAB> <H|-> <TAB> <neighbor ids separated by spaces>

        Ids are written as dot-joined fields, e.g. A.2.1
        """
        lines = []
        for v in sorted(self.graph.nodes, key=_vertex_key):
            neighbors = " ".join(_format_vertex(u) for u in sorted(self.graph.neighbors(v), key=_vertex_key))
            mark = "H" if self.is_marked(v) else "-"
            lines.append(f"{_format_vertex(v)}\t{self.graph.nodes[v].get('role', '')}\t{mark}\t{neighbors}")
        if self.lattice_h_marks:
            lines.append("# lattice-level H: " + " ".join(sorted(self.lattice_h_marks)))
        return "\n".join(lines) + "\n"


def _format_vertex(v) -> str:
    if isinstance(v, tuple):
        return ".".join(str(part) for part in v)
    return str(v)


def _vertex_key(v):
    return tuple(str(part) for part in v) if isinstance(v, tuple) else (str(v),)


@dataclass
class ComponentSet:
    """Components of a decomposed graph plus the fusions that re-merge them"""
    components: List[PhysGraph]
    inter_component_fusions: List[Tuple[Hashable, Hashable]]

    def total_vertices(self) -> int:
        return sum(c.num_vertices() for c in self.components)


def apply_h(g: PhysGraph, v: Hashable) -> PhysGraph:
    """Record a Hadamard on v"""
    g.h_marks[v] += 1
    return g


def apply_cz(g: PhysGraph, u: Hashable, v: Hashable) -> PhysGraph:
    """
    CZ between u and v on a graph state with pending Hadamard marks

    Unmarked ends toggle the edge. If exactly one end carries a Hadamard, the
    gate acts as a CNOT onto that end and toggles the partner against its
    neighbourhood.
    """
    if g.is_marked(u) and g.is_marked(v):
        raise UsageError(f"CZ between two Hadamard-marked vertices {u!r}, {v!r}")
    if g.is_marked(u):
        return _toggle_against(g, u, v)
    if g.is_marked(v):
        return _toggle_against(g, v, u)
    g.toggle_edge(u, v)
    return g


def _toggle_against(g: PhysGraph, h_vertex, partner) -> PhysGraph:
    if g.graph.has_edge(h_vertex, partner):
        raise UsageError(f"{h_vertex!r} and {partner!r} are adjacent")
    for i in list(g.graph.neighbors(h_vertex)):
        g.toggle_edge(partner, i)
    return g


def h_then_cz_transform(g: PhysGraph, h_vertex: Hashable, cz_partner: Hashable) -> PhysGraph:
    """
    Hadamard on h_vertex followed by CZ(h_vertex, cz_partner)

    Args:
        g: graph, not modified
        h_vertex: vertex receiving the Hadamard
        cz_partner: vertex not adjacent to h_vertex

    Returns:
        New graph with edges (cz_partner, i) toggled for every neighbour i of h_vertex
    """
    if g.graph.has_edge(h_vertex, cz_partner) or h_vertex == cz_partner:
        raise UsageError(f"{h_vertex!r} and {cz_partner!r} must be distinct and non-adjacent")
    out = g.copy()
    _toggle_against(out, h_vertex, cz_partner)
    out.h_marks[h_vertex] += 1
    return out


def _encoded_qubit(g: PhysGraph, label: str, params: EncodingParams, absorbed_h: bool) -> List[Tuple]:
    """
    Add the photons of one encoded lattice qubit and return its attachment set

    Without an absorbed lattice Hadamard the qubit is |+_L>: block-1 photons join
    the first photon of every other block, the remaining photons of block i hang
    on its first photon, and first photons of blocks 2..n carry H. With the
    lattice Hadamard absorbed, every block is a star around its H-marked first
    photon and the star centres form the attachment set.
    """
    n, m = params.n, params.m
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            g.add_vertex((label, i, j), f"{label}[{i},{j}]")
    for i in range(1, n + 1):
        for j in range(2, m + 1):
            if absorbed_h or i > 1:
                g.add_edge((label, i, 1), (label, i, j))
    if absorbed_h:
        for i in range(1, n + 1):
            g.h_marks[(label, i, 1)] += 1
        return [(label, i, 1) for i in range(1, n + 1)]

    for i in range(2, n + 1):
        g.h_marks[(label, i, 1)] += 1
        for j in range(1, m + 1):
            g.add_edge((label, 1, j), (label, i, 1))
    return [(label, 1, j) for j in range(1, m + 1)]


def encoded_qubit_graph(params: EncodingParams, absorbed_h: bool = False, label: str = "Q"):
    """Graph of a single encoded qubit in |+_L> (or |0_L> when absorbed_h) and its attachment set"""
    g = PhysGraph()
    attach = _encoded_qubit(g, label, params, absorbed_h)
    return g, attach


def _join(g: PhysGraph, left: Iterable, right: Iterable) -> None:
    """Lattice-level CZ between two encoded qubits: complete bipartite attachment"""
    right = list(right)
    for u in left:
        for v in right:
            g.add_edge(u, v)


def microcluster_graph(kind: MicroclusterKind, config: HConfig, params: EncodingParams) -> PhysGraph:
    """
    Physical-level graph of a post-H microcluster

    The central microcluster is A-B-C with an unencoded B; the side microcluster
    L-M-R is fully encoded. HIC puts the step-1 Hadamards on A and C; HIS puts
    them on M. Every side microcluster also carries the step-2 Hadamard on L.

    Args:
        kind: central or side
        config: HIC or HIS
        params: parity code

    Returns:
        PhysGraph with 2nm + 1 (central) or 3nm (side) vertices
    """
    g = PhysGraph()
    if kind is MicroclusterKind.CENTRAL:
        absorbed = config is HConfig.HIC
        a = _encoded_qubit(g, "A", params, absorbed)
        g.add_vertex(("B", 0, 0), CENTRAL_UNENCODED)
        c = _encoded_qubit(g, "C", params, absorbed)
        _join(g, a, [("B", 0, 0)])
        _join(g, [("B", 0, 0)], c)
        return g

    if config is HConfig.HIC:
        left = _encoded_qubit(g, "L", params, True)
        middle = _encoded_qubit(g, "M", params, False)
    else:
        # L is adjacent to the absorbed Hadamard on M, so its own stays lattice-level
        left = _encoded_qubit(g, "L", params, False)
        middle = _encoded_qubit(g, "M", params, True)
        g.lattice_h_marks.add("L")
    right = _encoded_qubit(g, "R", params, False)
    _join(g, left, middle)
    _join(g, middle, right)
    return g


def twin_classes(g: PhysGraph) -> List[Tuple[List, Set]]:
    """Maximal vertex sets sharing one open neighbourhood, with that neighbourhood"""
    groups: Dict[frozenset, List] = {}
    for v in g.graph.nodes:
        groups.setdefault(frozenset(g.graph.neighbors(v)), []).append(v)
    return [(sorted(members, key=_vertex_key), set(nbhd)) for nbhd, members in groups.items()]


def _splittable(g: PhysGraph):
    candidates = [(members, nbhd) for members, nbhd in twin_classes(g)
                  if len(members) >= 2 and len(nbhd) >= 2]
    if not candidates:
        return None
    return max(candidates, key=lambda c: (len(c[0]), [_vertex_key(v) for v in c[0]]))


def decompose_components(g: PhysGraph) -> ComponentSet:
    """
    Separate repetitive structures attached to several vertices

    A twin class R attached to two or more vertices N(R) is cut off: a new vertex
    x joins all of R, a new vertex y joins all of N(R), and (x, y) becomes an
    inter-component fusion. Largest classes are split first.
    """
    work = g.copy()
    fusions = []
    while True:
        found = _splittable(work)
        if found is None:
            break
        members, nbhd = found
        k = len(fusions)
        x, y = ("fusion", k, "x"), ("fusion", k, "y")
        work.add_vertex(x, FUSION_ROLE)
        work.add_vertex(y, FUSION_ROLE)
        for r in members:
            for u in nbhd:
                work.graph.remove_edge(r, u)
            work.add_edge(x, r)
        for u in nbhd:
            work.add_edge(y, u)
        fusions.append((x, y))
        logger.debug("split twin class of %d vertices from %d neighbours", len(members), len(nbhd))

    components = []
    for nodes in sorted(nx.connected_components(work.graph), key=lambda c: min(_vertex_key(v) for v in c)):
        sub = PhysGraph(
            work.graph.subgraph(nodes).copy(),
            Counter({v: c for v, c in work.h_marks.items() if v in nodes}),
            set(work.lattice_h_marks),
        )
        components.append(sub)
    return ComponentSet(components, fusions)


def merge_components(components: ComponentSet) -> PhysGraph:
    """Re-merge by type-II fusions: N(x) x N(y) toggled, x and y consumed"""
    merged = PhysGraph()
    for comp in components.components:
        merged.graph.update(comp.graph)
        merged.h_marks.update(comp.h_marks)
        merged.lattice_h_marks |= comp.lattice_h_marks
    for x, y in components.inter_component_fusions:
        nx_, ny_ = merged.neighbors(x) - {y}, merged.neighbors(y) - {x}
        merged.graph.remove_nodes_from([x, y])
        for u in nx_:
            for v in ny_:
                if u != v:
                    merged.toggle_edge(u, v)
        merged.h_marks.pop(x, None)
        merged.h_marks.pop(y, None)
    return merged
