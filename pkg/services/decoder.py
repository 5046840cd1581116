"""
Weighted minimum-weight perfect matching decoder for primal syndromes
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from services.errors import DecodeError
from services.lattice_sim import QubitRecords, RhgLattice, Syndrome

logger = logging.getLogger(__name__)

BOUNDARY = "boundary"
EXCLUDE_BELOW = 1e-12


@dataclass
class MatchingProblem:
    """Cell-adjacency graph whose edges are primal qubits weighted by log[(1 - q)/q]"""
    lattice: RhgLattice
    defects: List[int]
    weights: np.ndarray
    excluded: np.ndarray
    graph: nx.Graph


@dataclass
class Correction:
    """Estimated primal errors, the matched pairs and their total weight"""
    errors: np.ndarray
    weight: float = 0.0
    pairs: List[Tuple] = field(default_factory=list)


def qubit_weights(q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-qubit weights and the excluded mask

    q below EXCLUDE_BELOW is excluded. When every q is 0 or 1/2 the deficient
    qubits get weight 1 instead of log 1 = 0.
    """
    q = np.asarray(q, dtype=float)
    excluded = q < EXCLUDE_BELOW
    half = np.abs(q - 0.5) < EXCLUDE_BELOW
    weights = np.zeros_like(q)
    if np.all(excluded | half):
        weights[half] = 1.0
        return weights, excluded
    live = ~excluded
    weights[live] = np.log((1.0 - q[live]) / q[live])
    weights[half] = 0.0
    return weights, excluded


def build_matching_problem(syndrome: Syndrome, records: QubitRecords, lattice: RhgLattice) -> MatchingProblem:
    """
    Decoding graph of one trial

    Args:
        syndrome: violated primal cells
        records: per-qubit q_err (primal entries are used)
        lattice: geometry; x-boundary faces attach their cell to the boundary node

    Returns:
        MatchingProblem over the unexcluded primal qubits
    """
    q = records.q_err[:lattice.n_primal]
    weights, excluded = qubit_weights(q)
    graph = nx.Graph()
    graph.add_nodes_from(range(lattice.num_cells))
    graph.add_node(BOUNDARY)
    for f in np.nonzero(~excluded)[0]:
        cells = [int(c) for c in lattice.face_cells[f] if c >= 0]
        if len(cells) == 2:
            u, v = cells
        elif len(cells) == 1 and lattice.x_boundary[f]:
            u, v = cells[0], BOUNDARY
        else:
            continue
        w = float(weights[f])
        if not graph.has_edge(u, v) or graph[u][v]["weight"] > w:
            graph.add_edge(u, v, weight=w, face=int(f))
    defects = sorted(syndrome.violated_cells)
    return MatchingProblem(lattice, defects, weights, excluded, graph)


def _shortest_paths(problem: MatchingProblem) -> Dict[int, Tuple[dict, dict]]:
    return {d: nx.single_source_dijkstra(problem.graph, d, weight="weight") for d in problem.defects}


def _path_faces(problem: MatchingProblem, path: List) -> List[int]:
    return [problem.graph[u][v]["face"] for u, v in zip(path, path[1:])]


def decode(problem: MatchingProblem) -> Correction:
    """
    Minimum-weight correction by shortest paths plus exact matching

    Every defect gets a private boundary copy; boundary copies pair with each
    other at zero cost.

    Raises:
        DecodeError: a defect reaches neither another defect nor the boundary
    """
    errors = np.zeros(problem.lattice.n_primal, dtype=bool)
    if not problem.defects:
        return Correction(errors)

    paths = _shortest_paths(problem)
    complete = nx.Graph()
    defects = problem.defects
    for i, d in enumerate(defects):
        dist, _ = paths[d]
        complete.add_node(("d", d))
        complete.add_node(("b", d))
        if BOUNDARY in dist:
            complete.add_edge(("d", d), ("b", d), weight=dist[BOUNDARY])
        for e in defects[i + 1:]:
            if e in dist:
                complete.add_edge(("d", d), ("d", e), weight=dist[e])
        for e in defects[i + 1:]:
            complete.add_edge(("b", d), ("b", e), weight=0.0)
        if complete.degree(("d", d)) == 0:
            raise DecodeError(f"defect in cell {d} is isolated")

    matching = nx.min_weight_matching(complete, weight="weight")
    matched = {node for pair in matching for node in pair}
    if any(("d", d) not in matched for d in defects):
        raise DecodeError("no perfect matching of the defects exists")

    total = 0.0
    pairs = []
    for a, b in sorted(matching, key=lambda p: sorted(p)):
        if a[0] == "b" and b[0] == "b":
            continue
        if a[0] == "b":
            a, b = b, a
        source = a[1]
        dist, route = paths[source]
        target = b[1] if b[0] == "d" else BOUNDARY
        total += dist[target]
        pairs.append((source, target))
        for f in _path_faces(problem, route[target]):
            errors[f] ^= True
    logger.debug("matched %d defects with total weight %.4f", len(defects), total)
    return Correction(errors, total, pairs)


def brute_force_min_weight(problem: MatchingProblem) -> float:
    """Minimum total weight over every pairing of defects with each other or the boundary"""
    paths = _shortest_paths(problem)
    inf = float("inf")

    def dist(a, b):
        return paths[a][0].get(b, inf)

    def best(remaining: Tuple[int, ...]) -> float:
        if not remaining:
            return 0.0
        first, rest = remaining[0], remaining[1:]
        options = [dist(first, BOUNDARY) + best(rest)]
        for k, other in enumerate(rest):
            options.append(dist(first, other) + best(rest[:k] + rest[k + 1:]))
        return min(options)

    return best(tuple(problem.defects))
