"""
Small stabilizer-state simulator used to check fusion semantics and graph templates
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Tuple

import networkx as nx
import numpy as np
import stim

from services.errors import UsageError
from services.graph_states import PhysGraph

logger = logging.getLogger(__name__)

MAX_QUBITS = 32

_PAULI_CODE = {"I": 0, "X": 1, "Y": 2, "Z": 3}


@dataclass
class StabilizerState:
    """Pure stabilizer state over named qubits, backed by a stim tableau simulator"""
    sim: stim.TableauSimulator
    index: Dict[Hashable, int]

    @property
    def num_qubits(self) -> int:
        return len(self.index)

    @classmethod
    def from_graph(cls, g) -> 'StabilizerState':
        """
        Graph state |G> with Hadamards applied on H-marked vertices

        Args:
            g: PhysGraph, or a plain networkx graph (no marks)
        """
        graph = g.graph if isinstance(g, PhysGraph) else g
        marked = g.marked if isinstance(g, PhysGraph) else set()
        nodes = sorted(graph.nodes, key=repr)
        if len(nodes) > MAX_QUBITS:
            raise UsageError(f"oracle limited to {MAX_QUBITS} qubits, got {len(nodes)}")
        index = {v: k for k, v in enumerate(nodes)}
        sim = stim.TableauSimulator()
        sim.set_num_qubits(len(nodes))
        if nodes:
            sim.h(*range(len(nodes)))
        for u, v in graph.edges():
            sim.cz(index[u], index[v])
        for v in sorted(marked, key=repr):
            sim.h(index[v])
        return cls(sim, index)

    def copy(self) -> 'StabilizerState':
        return StabilizerState(self.sim.copy(), dict(self.index))

    def pauli(self, ops: Mapping[Hashable, str], sign: int = 1) -> stim.PauliString:
        """Signed Pauli string from {qubit: 'X' | 'Y' | 'Z'}"""
        p = stim.PauliString(self.num_qubits)
        for q, op in ops.items():
            p[self.index[q]] = _PAULI_CODE[op]
        return -p if sign < 0 else p

    def stabilizers(self) -> List[stim.PauliString]:
        return self.sim.canonical_stabilizers()

    def expectation(self, op: stim.PauliString) -> int:
        """+1 / -1 when +/-op stabilizes the state, 0 otherwise"""
        return int(self.sim.peek_observable_expectation(op))

    def measure_pauli(self, op: stim.PauliString, rng: np.random.Generator) -> Tuple[int, 'StabilizerState']:
        """
        Measure a Pauli observable

        Returns:
            (outcome, post-measurement state); this state is left unchanged
        """
        expected = self.expectation(op)
        out = self.copy()
        if expected != 0:
            return expected, out
        outcome = 1 if rng.random() < 0.5 else -1
        out.sim.postselect_observable(op, desired_value=(outcome == -1))
        return outcome, out

    def hadamard(self, q: Hashable) -> None:
        self.sim.h(self.index[q])

    def marginal_is_maximally_mixed(self, a: Hashable, b: Hashable) -> bool:
        """True when every non-identity Pauli on (a, b) has zero expectation"""
        if a == b:
            raise UsageError("marginal needs two distinct qubits")
        for pa, pb in itertools.product("IXYZ", repeat=2):
            if pa == "I" and pb == "I":
                continue
            ops = {q: p for q, p in ((a, pa), (b, pb)) if p != "I"}
            if self.expectation(self.pauli(ops)) != 0:
                return False
        return True

    def reduced_graph(self, keep: Iterable[Hashable]) -> Optional[nx.Graph]:
        """
        Graph of the state restricted to `keep`

        Valid when the kept qubits are in a pure state that is a graph state up to
        local Paulis; returns None when they are not.
        """
        keep = list(keep)
        n = self.num_qubits
        cols = [self.index[q] for q in keep]
        rest = [k for k in range(n) if k not in set(cols)]
        rows = []
        for s in self.stabilizers():
            xs, zs = s.to_numpy()
            rows.append(np.concatenate([xs, zs]).astype(np.uint8))
        mat = np.array(rows, dtype=np.uint8).reshape(len(rows), 2 * n)

        # eliminate support outside `keep`
        pivot_cols = [k for k in rest] + [n + k for k in rest]
        mat, used = _row_reduce(mat, pivot_cols)
        sub = mat[used:]
        sub = sub[~np.any(sub[:, pivot_cols], axis=1)] if pivot_cols else sub
        if len(sub) != len(keep):
            return None
        x_block = sub[:, cols]
        z_block = sub[:, [n + c for c in cols]]
        local = np.concatenate([x_block, z_block], axis=1)
        local, rank = _row_reduce(local, list(range(len(keep))))
        if rank != len(keep):
            return None
        adjacency = local[:, len(keep):]
        if np.any(np.diag(adjacency)) or np.any(adjacency != adjacency.T):
            return None
        graph = nx.Graph()
        graph.add_nodes_from(keep)
        for r, c in zip(*np.nonzero(np.triu(adjacency))):
            graph.add_edge(keep[r], keep[c])
        return graph


def _row_reduce(mat: np.ndarray, pivot_cols: List[int]) -> Tuple[np.ndarray, int]:
    """GF(2) elimination on the given columns; returns the matrix and the number of pivots"""
    mat = mat.copy()
    row = 0
    for col in pivot_cols:
        if row >= len(mat):
            break
        hits = np.nonzero(mat[row:, col])[0]
        if hits.size == 0:
            continue
        pivot = row + hits[0]
        if pivot != row:
            mat[[row, pivot]] = mat[[pivot, row]]
        others = np.nonzero(mat[:, col])[0]
        for r in others:
            if r != row:
                mat[r] ^= mat[row]
        row += 1
    return mat, row


def from_graph(g) -> StabilizerState:
    return StabilizerState.from_graph(g)


def measure_pauli(state: StabilizerState, op: stim.PauliString, rng: np.random.Generator):
    return state.measure_pauli(op, rng)


def marginal_is_maximally_mixed(state: StabilizerState, a: Hashable, b: Hashable) -> bool:
    return state.marginal_is_maximally_mixed(a, b)
