"""
Exhaustive enumeration of physical-level BSM outcomes

Independent of the closed forms in bsm_model: every outcome sequence of the block
procedure is enumerated together with its likelihood under each block Bell state,
and the MAP decision error is computed from the posterior. Used to check the
closed-form event tables and the lattice-level vote.
"""
import itertools
import logging
from typing import Dict, List, Tuple

import numpy as np

from models.config import DetectorModel, EncodingParams, LossParams
from models.events import BlockEvent, BlockEventTable

logger = logging.getLogger(__name__)

# physical outcomes
FAIL = "f"
LOST = "l"

PSI = "psi"

_TIE = 1e-12


def _physical_prob(outcome, kind, letter: int, sign: int, det: DetectorModel, x: float) -> float:
    """
    P(outcome | measurement kind, Bell state of the pair)

    kind is PSI for B_psi or the sign bit s for B_s. Successful outcomes are
    ("sign", bit) for B_psi and ("letter", bit) for B_s.
    """
    lost_outcome = LOST if det is DetectorModel.PNRD_TWO else FAIL
    if kind == PSI:
        resolved = ("sign", sign) if letter == 1 else FAIL
    else:
        resolved = ("letter", letter) if sign == kind else FAIL
    prob = 0.0
    if outcome == resolved:
        prob += x
    if outcome == lost_outcome:
        prob += 1.0 - x
    return prob


def _phase_one_records(j: int, det: DetectorModel):
    """
    Possible B_psi stages: (outcomes, sign used for B_s, sign drawn at random)
    """
    pnrd = det is DetectorModel.PNRD_TWO
    records = []
    for fails in range(j + 1):
        prefix = (FAIL,) * fails
        if fails == j:
            for s in (0, 1):
                records.append((prefix, s, True))
            break
        for s in (0, 1):
            records.append((prefix + (("sign", s),), s, False))
        if pnrd:
            for s in (0, 1):
                records.append((prefix + (LOST,), s, True))
    return records


def _phase_two_outcomes(det: DetectorModel):
    base = [("letter", 0), ("letter", 1), FAIL]
    if det is DetectorModel.PNRD_TWO:
        base.append(LOST)
    return base


def _classify(phase_one, phase_two, j: int, det: DetectorModel) -> str:
    if det is DetectorModel.PNRD_TWO:
        lossless = LOST not in phase_one and LOST not in phase_two
        if lossless and all(o != FAIL for o in phase_two):
            return "Success"
        psi_success = any(isinstance(o, tuple) for o in phase_one)
        if not psi_success and all(o == LOST for o in phase_two):
            return "Failure"
        return "SignDisc"
    r = sum(1 for o in phase_one if o == FAIL)
    unit = [o for o in phase_one if isinstance(o, tuple)] + list(phase_two)
    n_fail = sum(1 for o in unit if o == FAIL)
    if n_fail == 0:
        return f"S{r}"
    if r == j and n_fail == len(phase_two):
        return "F"
    return "D"


def block_outcomes(params: EncodingParams, det: DetectorModel, loss: LossParams):
    """
    All outcomes of one block-level BSM

    Returns:
        (event ids, likelihoods) where likelihoods has shape (K, 2, 2) indexed by
        outcome, block letter (0 = phi, 1 = psi) and block sign (0 = +, 1 = -)
    """
    m, j = params.m, params.j
    x = loss.x
    # pair letter assignments of each block letter: even or odd number of psi pairs
    terms = {L: [t for t in itertools.product((0, 1), repeat=m) if sum(t) % 2 == L] for L in (0, 1)}

    ids: List[str] = []
    liks = []
    for phase_one, s, random_s in _phase_one_records(j, det):
        rest = m - len(phase_one)
        for phase_two in itertools.product(_phase_two_outcomes(det), repeat=rest):
            kinds = [PSI] * len(phase_one) + [s] * rest
            outcomes = list(phase_one) + list(phase_two)
            lik = np.zeros((2, 2))
            for L in (0, 1):
                for S in (0, 1):
                    total = 0.0
                    for term in terms[L]:
                        p = 0.5 if random_s else 1.0
                        for o, kind, letter in zip(outcomes, kinds, term):
                            p *= _physical_prob(o, kind, letter, S, det, x)
                            if p == 0.0:
                                break
                        total += p
                    lik[L, S] = total / len(terms[L])
            if lik.sum() == 0.0:
                continue
            ids.append(_classify(phase_one, phase_two, j, det))
            liks.append(lik)
    return ids, np.array(liks)


def _decision_errors(liks: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-outcome probability and MAP sign / letter error for likelihood arrays of shape (K, 2, 2)
    """
    flat = liks.reshape(len(liks), 4)
    total = flat.sum(axis=1)
    prob = total / 4.0
    post = liks / total[:, None, None]
    best = flat.max(axis=1)
    winners = flat >= best[:, None] * (1.0 - _TIE)
    n_win = winners.sum(axis=1)
    # posterior of the states reached by flipping the sign, the letter, or both
    sign_wrong = post[:, :, ::-1] + post[:, ::-1, ::-1]
    lett_wrong = post[:, ::-1, :] + post[:, ::-1, ::-1]
    q_sign = (winners * sign_wrong.reshape(len(liks), 4)).sum(axis=1) / n_win
    q_lett = (winners * lett_wrong.reshape(len(liks), 4)).sum(axis=1) / n_win
    return prob, q_sign, q_lett


def brute_force_block_table(params: EncodingParams, det: DetectorModel, loss: LossParams) -> BlockEventTable:
    """
    Block event table computed by enumerating physical outcomes

    Events with zero probability keep q values of 0.
    """
    ids, liks = block_outcomes(params, det, loss)
    prob, q_sign, q_lett = _decision_errors(liks)
    order: List[str] = []
    if det is DetectorModel.PNRD_TWO:
        order = ["Success", "Failure", "SignDisc"]
    else:
        order = [f"S{r}" for r in range(params.j + 1)] + ["F", "D"]
    grouped: Dict[str, List[float]] = {e: [0.0, 0.0, 0.0] for e in order}
    for event_id, p, qs, ql in zip(ids, prob, q_sign, q_lett):
        acc = grouped[event_id]
        acc[0] += p
        acc[1] += p * qs
        acc[2] += p * ql
    events = []
    for event_id in order:
        p, ws, wl = grouped[event_id]
        if p > 0.0:
            events.append(BlockEvent(event_id, p, ws / p, wl / p))
        else:
            events.append(BlockEvent(event_id, 0.0, 0.0, 0.0))
    return BlockEventTable(tuple(events))


def brute_force_lattice_errors(params: EncodingParams, det: DetectorModel, loss: LossParams) -> Tuple[float, float]:
    """
    Expected lattice-level sign and letter errors from joint MAP over all block outcomes

    A lattice state of letter L and sign S is the uniform mixture of block products
    with every block letter L and block signs of parity S.
    """
    _, liks = block_outcomes(params, det, loss)
    # joint[t, L, p]: summed likelihood of outcome tuple t over block sign strings of parity p
    joint = liks.copy()
    for _ in range(params.n - 1):
        combined = np.empty((len(joint), len(liks), 2, 2))
        for p in (0, 1):
            combined[:, :, :, p] = (joint[:, None, :, p] * liks[None, :, :, 0]
                                    + joint[:, None, :, 1 - p] * liks[None, :, :, 1])
        joint = combined.reshape(-1, 2, 2)
    joint = joint / 2.0 ** (params.n - 1)
    prob, q_sign, q_lett = _decision_errors(joint)
    logger.debug("enumerated %d lattice outcomes, total probability %.15f", len(prob), prob.sum())
    return float(np.dot(prob, q_sign)), float(np.dot(prob, q_lett))
