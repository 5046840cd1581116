"""
Error model of physical-, block- and lattice-level Bell-state measurements under photon loss
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from models.config import DetectorModel, EncodingParams, LossParams
from models.events import BlockEvent, BlockEventTable, FusionErrorProfile, LatticeEventProbs
from services.errors import ParameterError, RangeError, UsageError, check_probability

logger = logging.getLogger(__name__)

TOLERANCE = 1e-12
DEFAULT_VOTE_CAP = 12

PNRD_EVENTS = ("Success", "Failure", "SignDisc")


def block_event_table(params: EncodingParams, det: DetectorModel, loss: LossParams) -> BlockEventTable:
    """
    Event table of one block-level BSM

    Args:
        params: parity code and B_psi attempt limit
        det: detector model
        loss: photon loss rate

    Returns:
        Events S_0..S_j, F, D for on-off detectors; Success, Failure, SignDisc for PNRDs
    """
    m, j = params.m, params.j
    x = loss.x
    if det is DetectorModel.PNRD_TWO:
        p_s = (1.0 - 2.0 ** -(j + 1)) * x ** m
        p_f = sum((x / 2.0) ** l * (1.0 - x) ** (m - l) for l in range(j + 1))
        p_sd = max(0.0, 1.0 - p_s - p_f)
        return BlockEventTable((
            BlockEvent("Success", p_s, 0.0, 0.0),
            BlockEvent("Failure", p_f, 0.5, 0.5),
            BlockEvent("SignDisc", p_sd, 0.0, 0.5),
        ))

    events = []
    ratio = x / (2.0 - x)
    for r in range(j + 1):
        p_r = (1.0 - x / 2.0) ** r * x ** (m - r) / 2.0
        events.append(BlockEvent(f"S{r}", p_r, 0.0, 0.5 * (1.0 - ratio ** r)))
    residual = (1.0 - x) ** (m - j)
    p_fail = (1.0 - x / 2.0) ** j * (1.0 + residual) / 2.0
    events.append(BlockEvent("F", p_fail, residual / (1.0 + residual), 0.5))
    p_d = 1.0 - sum(e.probability for e in events)
    # the remainder can dip a few ulps below zero
    events.append(BlockEvent("D", max(0.0, p_d), 0.0, 0.5))
    return BlockEventTable(tuple(events))


def lattice_event_probs(params: EncodingParams, loss: LossParams,
                        det: DetectorModel = DetectorModel.PNRD_TWO) -> LatticeEventProbs:
    """Probabilities of the S, D_L, D_S and F lattice-level events (PNRDs only)"""
    if det is not DetectorModel.PNRD_TWO:
        raise UsageError("closed-form lattice events exist only for PNRDs")
    table = block_event_table(params, det, loss)
    p_s, p_f, p_sd = (table[name].probability for name in PNRD_EVENTS)
    n = params.n
    no_fail = (1.0 - p_f) ** n
    no_success = (1.0 - p_s) ** n
    neither = p_sd ** n
    return LatticeEventProbs(
        P_S=no_fail - neither,
        P_DL=1.0 - no_success - no_fail + neither,
        P_DS=neither,
        P_F=no_success - neither,
    )


def lattice_sign_error_prob(n_failed_blocks: int, q_sign_F: float) -> float:
    """Probability that an odd number of the failed blocks carry a sign error"""
    if n_failed_blocks < 0:
        raise ParameterError("n_failed_blocks must be non-negative")
    return 0.5 - 0.5 * (1.0 - 2.0 * q_sign_F) ** n_failed_blocks


def lattice_letter_error_prob(block_letter_qs: Sequence[float], cap: int = DEFAULT_VOTE_CAP) -> float:
    """
    Letter error probability of the weighted majority vote over block-level letters

    Each block votes with weight log[(1 - q)/q]. A block with q = 0 is authoritative;
    ties are broken by a fair coin.

    Args:
        block_letter_qs: letter error probability of every block, each in [0, 1/2]
        cap: largest number of blocks accepted (cost grows as 2^n)

    Returns:
        Probability that the voted lattice-level letter is wrong
    """
    qs = [float(q) for q in block_letter_qs]
    if not qs:
        raise UsageError("the vote needs at least one block")
    if len(qs) > cap:
        raise UsageError(f"exact vote limited to {cap} blocks, got {len(qs)}")
    for q in qs:
        if not -TOLERANCE <= q <= 0.5 + TOLERANCE:
            raise RangeError(f"block letter error probability {q} outside [0, 1/2]")
    if min(qs) <= TOLERANCE:
        return 0.0
    voters = np.array([q for q in qs if q < 0.5 - TOLERANCE])
    if voters.size == 0:
        return 0.5

    weights = np.log((1.0 - voters) / voters)
    flips = np.array(list(itertools.product((0, 1), repeat=voters.size)), dtype=bool)
    probs = np.prod(np.where(flips, voters, 1.0 - voters), axis=1)
    margin = (2.0 * flips - 1.0) @ weights
    ties = np.abs(margin) <= 1e-12 * max(1.0, weights.sum())
    signs = np.where(ties, 0.0, np.sign(margin))
    return float(0.5 + 0.5 * np.dot(probs, signs))


def _with_error_bits(q_sign: float, q_lett: float, rng: np.random.Generator) -> FusionErrorProfile:
    sign_error = bool(q_sign > 0.0 and rng.random() < q_sign)
    lett_error = bool(q_lett > 0.0 and rng.random() < q_lett)
    return FusionErrorProfile(q_sign, q_lett, sign_error, lett_error)


def sample_lattice_fusion(params: EncodingParams, det: DetectorModel, loss: LossParams,
                          rng: np.random.Generator) -> FusionErrorProfile:
    """Sample one lattice-level fusion of encoded qubits"""
    if det is DetectorModel.PNRD_TWO:
        probs = lattice_event_probs(params, loss)
        index = rng.choice(4, p=_normalised(probs.as_list()))
        q_sign, q_lett = list(LatticeEventProbs.PROFILES.values())[index]
        return _with_error_bits(q_sign, q_lett, rng)

    table = block_event_table(params, det, loss)
    drawn = rng.choice(len(table), size=params.n, p=_normalised(table.probabilities))
    events = [table.events[i] for i in drawn]
    n_failed = sum(1 for e in events if e.event_id == "F")
    q_sign = lattice_sign_error_prob(n_failed, table["F"].q_sign)
    q_lett = lattice_letter_error_prob([e.q_lett for e in events])
    return _with_error_bits(q_sign, q_lett, rng)


def sample_unencoded_fusion(p_fail: float, loss: LossParams, rng: np.random.Generator) -> FusionErrorProfile:
    """Sample one fusion of unencoded photons: success, heralded failure or detected loss"""
    check_probability(p_fail, "p_fail")
    x = loss.x
    u = rng.random()
    if u < 1.0 - x:
        return _with_error_bits(0.5, 0.5, rng)
    if u < 1.0 - x + p_fail * x:
        return _with_error_bits(0.5, 0.0, rng)
    return FusionErrorProfile(0.0, 0.0, False, False)


def _normalised(probs: Iterable[float]) -> np.ndarray:
    arr = np.clip(np.asarray(list(probs), dtype=float), 0.0, None)
    return arr / arr.sum()


def unencoded_profile_distribution(p_fail: float, loss: LossParams) -> List[Tuple[Tuple[float, float], float]]:
    """(q_sign, q_lett) pairs of an unencoded fusion with their probabilities"""
    check_probability(p_fail, "p_fail")
    x = loss.x
    return [
        ((0.0, 0.0), (1.0 - p_fail) * x),
        ((0.5, 0.0), p_fail * x),
        ((0.5, 0.5), 1.0 - x),
    ]


def lattice_profile_distribution(params: EncodingParams, det: DetectorModel,
                                 loss: LossParams) -> List[Tuple[Tuple[float, float], float]]:
    """
    Exact distribution of the lattice-level (q_sign, q_lett) pair of an encoded fusion

    For on-off detectors the block events are grouped into multisets; the vote is
    symmetric so a multiset fixes the pair.
    """
    if det is DetectorModel.PNRD_TWO:
        probs = lattice_event_probs(params, loss)
        return [(LatticeEventProbs.PROFILES[key], p)
                for key, p in zip(("S", "DL", "DS", "F"), probs.as_list())]

    table = block_event_table(params, det, loss)
    n = params.n
    q_sign_f = table["F"].q_sign
    merged = {}
    for combo in itertools.combinations_with_replacement(range(len(table)), n):
        counts = np.bincount(combo, minlength=len(table))
        weight = math.factorial(n)
        prob = 1.0
        for event, c in zip(table.events, counts):
            weight //= math.factorial(int(c))
            prob *= event.probability ** int(c)
        prob *= weight
        if prob == 0.0:
            continue
        events = [table.events[i] for i in combo]
        n_failed = sum(1 for e in events if e.event_id == "F")
        key = (round(lattice_sign_error_prob(n_failed, q_sign_f), 15),
               round(lattice_letter_error_prob([e.q_lett for e in events]), 15))
        merged[key] = merged.get(key, 0.0) + prob
    return sorted(merged.items())


def lattice_error_rates(params: EncodingParams, det: DetectorModel, loss: LossParams) -> Tuple[float, float]:
    """Expected lattice-level sign and letter error rates of one fusion"""
    dist = lattice_profile_distribution(params, det, loss)
    q_sign = sum(p * qs for (qs, _), p in dist)
    q_lett = sum(p * ql for (_, ql), p in dist)
    return q_sign, q_lett


@dataclass(frozen=True)
class FusionSampler:
    """Vectorised sampler of fusion error profiles from a finite (q_sign, q_lett) distribution"""
    q_sign: np.ndarray
    q_lett: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_distribution(cls, dist) -> 'FusionSampler':
        pairs = [pair for pair, _ in dist]
        return cls(
            q_sign=np.array([p[0] for p in pairs], dtype=float),
            q_lett=np.array([p[1] for p in pairs], dtype=float),
            probs=_normalised(p for _, p in dist),
        )

    @classmethod
    def unencoded(cls, p_fail: float, loss: LossParams) -> 'FusionSampler':
        return cls.from_distribution(unencoded_profile_distribution(p_fail, loss))

    @classmethod
    def encoded(cls, params: EncodingParams, det: DetectorModel, loss: LossParams) -> 'FusionSampler':
        return cls.from_distribution(lattice_profile_distribution(params, det, loss))

    @classmethod
    def ideal(cls) -> 'FusionSampler':
        return cls.from_distribution([((0.0, 0.0), 1.0)])

    def sample(self, count: int, rng: np.random.Generator):
        """
        Draw `count` profiles

        Returns:
            (q_sign, q_lett, sign_error, lett_error) arrays of length count
        """
        index = rng.choice(self.probs.size, size=count, p=self.probs)
        q_sign = self.q_sign[index]
        q_lett = self.q_lett[index]
        sign_error = rng.random(count) < q_sign
        lett_error = rng.random(count) < q_lett
        return q_sign, q_lett, sign_error, lett_error
