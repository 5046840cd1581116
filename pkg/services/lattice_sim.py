"""
RHG lattice built from star clusters: geometry, fusion slots, heralded error
propagation and primal syndromes of one Monte-Carlo trial
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Set, Tuple

import numpy as np

from models.config import ModelConfig
from models.events import FusionErrorProfile
from services.bsm_model import FusionSampler
from services.errors import ParameterError

logger = logging.getLogger(__name__)

STEP1 = "step1"
STEP2 = "step2"


def _odd_axes(site) -> Tuple[int, ...]:
    return tuple(a for a in range(3) if site[a] % 2 == 1)


def _shift(site, axis: int, step: int) -> Tuple[int, int, int]:
    out = [int(v) for v in site]
    out[axis] += step
    return tuple(out)


def neighbor_axes(site) -> Tuple[int, int]:
    """Axes along which a central qubit has neighbours: odd axes of a face, even axes of an edge"""
    odd = _odd_axes(site)
    if len(odd) == 2:
        return odd
    return tuple(a for a in range(3) if a not in odd)


@dataclass(frozen=True)
class FusionSlot:
    """
    One fusion of a trial

    step1: `own` is the star's central qubit, `targets` the two neighbours along the
    side's axis (-1 when outside the lattice). step2: `primal` and `dual` are the
    two central qubits joined by the fusion.
    """
    kind: str
    index: int
    own: int = -1
    targets: Tuple[int, int] = (-1, -1)
    primal: int = -1
    dual: int = -1


@dataclass(frozen=True, eq=False)
class RhgLattice:
    """
    Central qubits of an RHG lattice on a doubled-integer grid

    Primal cells sit at all-odd coordinates; primal qubits (faces) have exactly two
    odd coordinates and come first in `coords`, dual qubits (edges) follow.
    x- and t-boundaries are primal, y-boundaries dual.
    """
    cells_x: int
    cells_y: int
    cells_t: int
    coords: np.ndarray
    n_primal: int
    index: Dict[Tuple[int, int, int], int]
    cell_coords: np.ndarray
    cell_faces: np.ndarray
    face_cells: np.ndarray
    x_boundary: np.ndarray
    t_boundary: np.ndarray
    sheet: np.ndarray
    step1_own: np.ndarray
    step1_axis: np.ndarray
    step1_targets: np.ndarray
    step2_primal: np.ndarray
    step2_dual: np.ndarray

    @classmethod
    def build(cls, cells_x: int, cells_y: int, cells_t: int) -> 'RhgLattice':
        """Lattice of cells_x x cells_y x cells_t primal cells"""
        if min(cells_x, cells_y, cells_t) < 1:
            raise ParameterError("lattice needs at least one cell along every axis")
        size = (2 * cells_x, 2 * cells_y, 2 * cells_t)

        faces, edges = [], []
        for site in itertools.product(*(range(s + 1) for s in size)):
            n_odd = len(_odd_axes(site))
            if n_odd == 2:
                # y-normal faces on the y planes are missing (dual boundary)
                if site[1] % 2 == 0 and site[1] in (0, size[1]):
                    continue
                faces.append(site)
            elif n_odd == 1:
                edges.append(site)
        face_set = set(faces)
        edges = [e for e in edges
                 if any(_shift(e, a, s) in face_set
                        for a in neighbor_axes(e) for s in (-1, 1))]
        coords = np.array(faces + edges, dtype=int).reshape(-1, 3)
        index = {tuple(int(c) for c in site): k for k, site in enumerate(coords)}
        n_primal = len(faces)

        cell_coords = np.array([
            (2 * cx + 1, 2 * cy + 1, 2 * ct + 1)
            for cx in range(cells_x) for cy in range(cells_y) for ct in range(cells_t)
        ], dtype=int)
        cell_faces = np.full((len(cell_coords), 6), -1, dtype=int)
        face_cells = np.full((n_primal, 2), -1, dtype=int)
        face_fill = np.zeros(n_primal, dtype=int)
        for c, centre in enumerate(cell_coords):
            k = 0
            for a in range(3):
                for s in (-1, 1):
                    f = index.get(_shift(centre, a, s))
                    if f is None:
                        continue
                    cell_faces[c, k] = f
                    face_cells[f, face_fill[f]] = c
                    face_fill[f] += 1
                    k += 1

        face_coords = coords[:n_primal]
        x_normal = face_coords[:, 0] % 2 == 0
        x_boundary = x_normal & np.isin(face_coords[:, 0], (0, size[0]))
        t_boundary = (face_coords[:, 2] % 2 == 0) & np.isin(face_coords[:, 2], (0, size[2]))
        sheet = x_normal & (face_coords[:, 0] == 0)

        step1_own, step1_axis, step1_targets = [], [], []
        step2 = []
        for k, site in enumerate(coords):
            for axis in neighbor_axes(site):
                nbrs = [index.get(_shift(site, axis, s), -1) for s in (-1, 1)]
                step1_own.append(k)
                step1_axis.append(axis)
                step1_targets.append(nbrs)
                if k < n_primal:
                    step2.extend((k, nb) for nb in nbrs if nb >= 0)
        step2 = np.array(sorted(step2), dtype=int).reshape(-1, 2)

        lattice = cls(
            cells_x=cells_x, cells_y=cells_y, cells_t=cells_t,
            coords=coords, n_primal=n_primal, index=index,
            cell_coords=cell_coords, cell_faces=cell_faces, face_cells=face_cells,
            x_boundary=x_boundary, t_boundary=t_boundary, sheet=sheet,
            step1_own=np.array(step1_own, dtype=int),
            step1_axis=np.array(step1_axis, dtype=int),
            step1_targets=np.array(step1_targets, dtype=int).reshape(-1, 2),
            step2_primal=step2[:, 0], step2_dual=step2[:, 1],
        )
        logger.debug("built lattice %dx%dx%d: %d primal, %d dual qubits, %d cells",
                     cells_x, cells_y, cells_t, n_primal, len(coords) - n_primal, len(cell_coords))
        return lattice

    @property
    def num_qubits(self) -> int:
        return len(self.coords)

    @property
    def num_cells(self) -> int:
        return len(self.cell_coords)

    def is_primal(self, qubit: int) -> bool:
        return qubit < self.n_primal

    def slot(self, kind: str, k: int) -> FusionSlot:
        if kind == STEP1:
            return FusionSlot(STEP1, k, own=int(self.step1_own[k]),
                              targets=tuple(int(t) for t in self.step1_targets[k]))
        return FusionSlot(STEP2, k, primal=int(self.step2_primal[k]), dual=int(self.step2_dual[k]))

    def syndrome(self, errors: np.ndarray) -> np.ndarray:
        """Violated-cell mask of a primal error pattern (first n_primal entries are used)"""
        padded = np.zeros(self.n_primal + 1, dtype=bool)
        padded[:self.n_primal] = np.asarray(errors[:self.n_primal], dtype=bool)
        return np.bitwise_xor.reduce(padded[self.cell_faces], axis=1)


def build_lattice(cfg: ModelConfig) -> RhgLattice:
    """(d-1) x (d-1) x (4d+1) cells for code distance d"""
    return RhgLattice.build(cfg.d - 1, cfg.d - 1, 4 * cfg.d + 1)


@dataclass
class QubitRecords:
    """
    Per-qubit error bit and heralded error probability of one trial

    Probabilities are held as r = 1 - 2q so independent deposits multiply.
    """
    error: np.ndarray
    r: np.ndarray
    lost: np.ndarray

    @classmethod
    def fresh(cls, num_qubits: int) -> 'QubitRecords':
        return cls(np.zeros(num_qubits, dtype=bool), np.ones(num_qubits), np.zeros(num_qubits, dtype=bool))

    @property
    def q_err(self) -> np.ndarray:
        return 0.5 * (1.0 - self.r)

    def deposit(self, qubits: np.ndarray, q: np.ndarray, bits: np.ndarray) -> None:
        """Independent error probabilities q with sampled bits on qubits (-1 entries skipped)"""
        qubits = np.asarray(qubits)
        q = np.broadcast_to(np.asarray(q, dtype=float), qubits.shape)
        bits = np.broadcast_to(np.asarray(bits, dtype=bool), qubits.shape)
        keep = qubits >= 0
        np.multiply.at(self.r, qubits[keep], 1.0 - 2.0 * q[keep])
        np.bitwise_xor.at(self.error, qubits[keep], bits[keep])


def propagate_fusion_errors(lattice: RhgLattice, slot: FusionSlot, profile: FusionErrorProfile,
                            cfg: ModelConfig, records: QubitRecords) -> QubitRecords:
    """
    Deposit the heralded errors of one fusion

    HIC step-1: sign on the star's own central qubit, letter (one shared bit) on
    the two neighbours along the side axis. HIS swaps the roles. Step-2: sign on
    the primal qubit, letter on the dual one.
    """
    if slot.kind == STEP1:
        if not cfg.hic:
            profile = profile.swapped()
        records.deposit(np.array([slot.own]), profile.q_sign, profile.sign_error)
        records.deposit(np.array(slot.targets), profile.q_lett, profile.lett_error)
    else:
        records.deposit(np.array([slot.primal]), profile.q_sign, profile.sign_error)
        records.deposit(np.array([slot.dual]), profile.q_lett, profile.lett_error)
    return records


@dataclass
class Syndrome:
    violated: np.ndarray

    @property
    def violated_cells(self) -> Set[int]:
        return set(int(c) for c in np.nonzero(self.violated)[0])


@dataclass
class TrialResult:
    """Everything the decoder and the logical-error judgment need from one trial"""
    syndrome: Syndrome
    records: QubitRecords
    step1: Optional[Tuple[np.ndarray, ...]] = None
    step2: Optional[Tuple[np.ndarray, ...]] = None

    @property
    def primal_errors(self) -> np.ndarray:
        return self.records.error

    def qubit_record(self, qubit: int) -> dict:
        return {
            "error": bool(self.records.error[qubit]),
            "q_err": float(self.records.q_err[qubit]),
            "lost": bool(self.records.lost[qubit]),
        }


@dataclass
class TrialRunner:
    """Lattice and fusion samplers of one scenario, reused across trials"""
    cfg: ModelConfig
    lattice: Optional[RhgLattice] = None
    step1_sampler: FusionSampler = field(init=False)
    step2_sampler: FusionSampler = field(init=False)

    def __post_init__(self):
        if self.lattice is None:
            self.lattice = build_lattice(self.cfg)
        self.step1_sampler, self.step2_sampler = fusion_samplers(self.cfg)

    @property
    def error_free(self) -> bool:
        """True when no trial of this scenario can carry an error (lossless, no heralded q)"""
        if self.cfg.eta > 0.0:
            return False
        return not any(
            np.any((s.probs > 0.0) & ((s.q_sign > 0.0) | (s.q_lett > 0.0)))
            for s in (self.step1_sampler, self.step2_sampler)
        )

    def run(self, rng: np.random.Generator, keep_profiles: bool = False) -> TrialResult:
        """One trial: sample fusions, propagate, sample central-qubit loss, syndrome"""
        cfg, lat = self.cfg, self.lattice
        records = QubitRecords.fresh(lat.num_qubits)

        step1 = None
        if not cfg.pssl:
            q_sign, q_lett, e_sign, e_lett = self.step1_sampler.sample(len(lat.step1_own), rng)
            if not cfg.hic:
                q_sign, q_lett, e_sign, e_lett = q_lett, q_sign, e_lett, e_sign
            records.deposit(lat.step1_own, q_sign, e_sign)
            records.deposit(lat.step1_targets[:, 0], q_lett, e_lett)
            records.deposit(lat.step1_targets[:, 1], q_lett, e_lett)
            step1 = (q_sign, q_lett, e_sign, e_lett)

        q_sign, q_lett, e_sign, e_lett = self.step2_sampler.sample(len(lat.step2_primal), rng)
        records.deposit(lat.step2_primal, q_sign, e_sign)
        records.deposit(lat.step2_dual, q_lett, e_lett)
        step2 = (q_sign, q_lett, e_sign, e_lett)

        lost = rng.random(lat.num_qubits) < cfg.eta
        coin = rng.random(lat.num_qubits) < 0.5
        records.lost = lost
        records.r[lost] = 0.0
        records.error ^= lost & coin

        # t-boundary faces are error-free
        tb = np.nonzero(lat.t_boundary)[0]
        records.error[tb] = False
        records.r[tb] = 1.0

        syndrome = Syndrome(lat.syndrome(records.error))
        if keep_profiles:
            return TrialResult(syndrome, records, step1, step2)
        return TrialResult(syndrome, records)


def fusion_samplers(cfg: ModelConfig) -> Tuple[FusionSampler, FusionSampler]:
    """(step-1, step-2) samplers; step-1 is ideal under post-selection"""
    if cfg.encoding:
        sampler = FusionSampler.encoded(cfg.enc_params, cfg.detector, cfg.loss)
    else:
        sampler = FusionSampler.unencoded(cfg.p_fail, cfg.loss)
    step1 = FusionSampler.ideal() if cfg.pssl else sampler
    return step1, sampler


def run_trial(cfg: ModelConfig, rng: np.random.Generator, runner: Optional[TrialRunner] = None) -> TrialResult:
    """Run one trial; pass a TrialRunner to reuse the lattice across trials"""
    runner = runner or TrialRunner(cfg)
    return runner.run(rng)


def judge_logical_error(actual_errors: np.ndarray, estimated_errors: np.ndarray, lattice: RhgLattice) -> bool:
    """True when the residual error count on the x = 0 primal sheet is odd"""
    p = lattice.n_primal
    residual = np.asarray(actual_errors[:p], dtype=bool) ^ np.asarray(estimated_errors[:p], dtype=bool)
    return bool(np.count_nonzero(residual & lattice.sheet) % 2)


def debug_dump(trial: TrialResult, lattice: RhgLattice) -> str:
    """Text dump: fusion slot -> profile, qubit -> (error, q_err), violated cells"""
    lines = []
    for kind, data, count in ((STEP1, trial.step1, len(lattice.step1_own)),
                              (STEP2, trial.step2, len(lattice.step2_primal))):
        if data is None:
            continue
        q_sign, q_lett, e_sign, e_lett = data
        for k in range(count):
            lines.append(f"{kind} {k} q_sign={q_sign[k]:.6g} q_lett={q_lett[k]:.6g} "
                         f"sign_error={int(e_sign[k])} lett_error={int(e_lett[k])}")
    q_err = trial.records.q_err
    for k, site in enumerate(lattice.coords):
        kind = "primal" if k < lattice.n_primal else "dual"
        lines.append(f"qubit {k} {kind} ({site[0]},{site[1]},{site[2]}) "
                     f"error={int(trial.records.error[k])} q_err={q_err[k]:.6g}")
    cells = " ".join(str(c) for c in sorted(trial.syndrome.violated_cells))
    lines.append(f"violated {cells}")
    return "\n".join(lines) + "\n"
