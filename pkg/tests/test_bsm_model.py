"""
Tests for the block- and lattice-level BSM error model
"""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from models.config import DetectorModel, EncodingParams, LossParams
from services.bsm_enumeration import brute_force_block_table, brute_force_lattice_errors
from services.bsm_model import (
    FusionSampler,
    block_event_table,
    lattice_error_rates,
    lattice_event_probs,
    lattice_letter_error_prob,
    lattice_profile_distribution,
    lattice_sign_error_prob,
    sample_lattice_fusion,
    sample_unencoded_fusion,
)
from services.errors import ParameterError, RangeError, UsageError

ON_OFF = DetectorModel.ON_OFF
PNRD = DetectorModel.PNRD_TWO

SMALL_CODES = [(m, j) for m in (1, 2, 3) for j in range(m)]
ETAS = (0.0, 0.05, 0.2)


def test_on_off_lossless_s0():
    table = block_event_table(EncodingParams(1, 3, 1), ON_OFF, LossParams(0.0))
    assert table["S0"].probability == pytest.approx(0.5, abs=1e-12)
    assert table["S0"].q_lett == 0.0


@pytest.mark.parametrize("m,j", SMALL_CODES)
def test_on_off_lossless_failure(m, j):
    table = block_event_table(EncodingParams(1, m, j), ON_OFF, LossParams(0.0))
    assert table["F"].q_sign == 0.0
    assert table["F"].probability == pytest.approx(0.5 ** (j + 1), abs=1e-12)


def test_table_spot_values_at_ten_percent_loss():
    table = block_event_table(EncodingParams(1, 3, 1), ON_OFF, LossParams(0.1))
    x = 0.81
    assert table["S1"].q_lett == pytest.approx(0.5 - 0.5 * (0.81 / 1.19), abs=1e-12)
    assert table["S1"].probability == pytest.approx((1 - 0.405) * 0.81 ** 2 / 2, abs=1e-12)
    assert table["F"].probability == pytest.approx(0.595 * (1 + 0.19 ** 2) / 2, abs=1e-12)
    assert table["F"].q_sign == pytest.approx(0.0361 / 1.0361, abs=1e-12)
    assert table["S0"].probability == pytest.approx(x ** 3 / 2, abs=1e-12)


@pytest.mark.parametrize("det", [ON_OFF, PNRD])
@pytest.mark.parametrize("m,j", SMALL_CODES)
@pytest.mark.parametrize("eta", ETAS + (0.5, 1.0))
def test_tables_are_distributions(det, m, j, eta):
    table = block_event_table(EncodingParams(1, m, j), det, LossParams(eta))
    assert table.total() == pytest.approx(1.0, abs=1e-12)
    for event in table:
        assert 0.0 <= event.probability <= 1.0
        assert 0.0 <= event.q_sign <= 0.5
        assert 0.0 <= event.q_lett <= 0.5


@pytest.mark.parametrize("det", [ON_OFF, PNRD])
@pytest.mark.parametrize("m,j", SMALL_CODES)
@pytest.mark.parametrize("eta", ETAS)
def test_block_table_matches_enumeration(det, m, j, eta):
    params = EncodingParams(1, m, j)
    analytic = block_event_table(params, det, LossParams(eta))
    enumerated = brute_force_block_table(params, det, LossParams(eta))
    assert analytic.ids == enumerated.ids
    for a, b in zip(analytic, enumerated):
        assert a.probability == pytest.approx(b.probability, abs=1e-12)
        if b.probability > 1e-14:
            assert a.q_sign == pytest.approx(b.q_sign, abs=1e-12)
            assert a.q_lett == pytest.approx(b.q_lett, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("m,j", [(1, 0), (2, 0), (2, 1), (3, 1), (3, 2)])
@pytest.mark.parametrize("eta", ETAS)
def test_on_off_lattice_errors_match_enumeration(n, m, j, eta):
    params = EncodingParams(n, m, j)
    expected = brute_force_lattice_errors(params, ON_OFF, LossParams(eta))
    assert lattice_error_rates(params, ON_OFF, LossParams(eta)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n,m,j", [(1, 2, 1), (2, 1, 0), (2, 2, 0), (2, 2, 1)])
@pytest.mark.parametrize("eta", ETAS)
def test_pnrd_lattice_errors_match_enumeration(n, m, j, eta):
    params = EncodingParams(n, m, j)
    probs = lattice_event_probs(params, LossParams(eta))
    q_sign, q_lett = brute_force_lattice_errors(params, PNRD, LossParams(eta))
    assert q_sign == pytest.approx(0.5 * (probs.P_DL + probs.P_F), abs=1e-12)
    assert q_lett == pytest.approx(0.5 * (probs.P_DS + probs.P_F), abs=1e-12)


def test_lattice_events_single_block_collapse():
    params = EncodingParams(1, 3, 1)
    table = block_event_table(params, PNRD, LossParams(0.0))
    probs = lattice_event_probs(params, LossParams(0.0))
    assert probs.P_DS == pytest.approx(table["SignDisc"].probability)
    assert probs.P_F == pytest.approx(table["Failure"].probability)
    assert probs.P_S == pytest.approx(1 - table["Failure"].probability - table["SignDisc"].probability)


def test_lattice_events_two_blocks_lossless():
    probs = lattice_event_probs(EncodingParams(2, 2, 1), LossParams(0.0))
    assert probs.P_S == pytest.approx(15 / 16, abs=1e-12)


@given(
    n=st.integers(1, 5),
    m=st.integers(1, 5),
    j_frac=st.floats(0, 1),
    eta=st.floats(0, 1),
)
def test_lattice_events_sum_to_one(n, m, j_frac, eta):
    j = int(j_frac * (m - 1))
    probs = lattice_event_probs(EncodingParams(n, m, j), LossParams(eta))
    assert probs.total() == pytest.approx(1.0, abs=1e-12)
    assert all(-1e-12 <= p <= 1 + 1e-12 for p in probs.as_list())


def test_lattice_events_reject_on_off():
    with pytest.raises(UsageError):
        lattice_event_probs(EncodingParams(2, 2, 1), LossParams(0.0), ON_OFF)


def test_invalid_code_parameters():
    with pytest.raises(ParameterError):
        EncodingParams(2, 2, 2)
    with pytest.raises(ParameterError):
        EncodingParams(0, 2, 0)
    with pytest.raises(RangeError):
        LossParams(1.5)


def test_sign_error_prob():
    assert lattice_sign_error_prob(0, 0.3) == 0.0
    assert lattice_sign_error_prob(3, 0.5) == pytest.approx(0.5)
    assert lattice_sign_error_prob(2, 0.1) == pytest.approx(0.18)


def _direct_vote(qs):
    total = 0.0
    for flips in itertools.product((0, 1), repeat=len(qs)):
        prob = 1.0
        margin = 0.0
        for flip, q in zip(flips, qs):
            prob *= q if flip else 1 - q
            margin += (2 * flip - 1) * math.log((1 - q) / q)
        if margin > 1e-12:
            total += prob
        elif abs(margin) <= 1e-12:
            total += 0.5 * prob
    return total


def test_vote_single_voter():
    assert lattice_letter_error_prob([0.2]) == pytest.approx(0.2)


def test_vote_uninformative():
    assert lattice_letter_error_prob([0.5, 0.5, 0.5]) == 0.5


def test_vote_authoritative_block():
    assert lattice_letter_error_prob([0.0, 0.4, 0.3]) == 0.0


def test_vote_three_blocks():
    qs = [0.1, 0.2, 0.4]
    assert lattice_letter_error_prob(qs) == pytest.approx(_direct_vote(qs), abs=1e-12)


def test_vote_bad_input():
    with pytest.raises(UsageError):
        lattice_letter_error_prob([])
    with pytest.raises(UsageError):
        lattice_letter_error_prob([0.1] * 13)
    with pytest.raises(RangeError):
        lattice_letter_error_prob([0.7])


q_values = st.floats(0.01, 0.5)


@given(st.lists(q_values, min_size=1, max_size=6), st.randoms())
def test_vote_permutation_symmetric(qs, random):
    shuffled = list(qs)
    random.shuffle(shuffled)
    assert lattice_letter_error_prob(qs) == pytest.approx(lattice_letter_error_prob(shuffled), abs=1e-12)


@given(st.lists(q_values, min_size=1, max_size=6), st.data())
def test_vote_monotone(qs, data):
    k = data.draw(st.integers(0, len(qs) - 1))
    raised = list(qs)
    raised[k] = data.draw(st.floats(qs[k], 0.5))
    assert lattice_letter_error_prob(qs) <= lattice_letter_error_prob(raised) + 1e-12


def test_lossless_pnrd_success_is_ideal():
    rng = np.random.default_rng(1)
    params = EncodingParams(2, 2, 1)
    for _ in range(200):
        profile = sample_lattice_fusion(params, PNRD, LossParams(0.0), rng)
        if profile.q_sign == 0.0 and profile.q_lett == 0.0:
            assert not profile.sign_error and not profile.lett_error
        assert profile.q_sign == 0.0


def test_on_off_all_failed_blocks():
    rng = np.random.default_rng(2)
    profile = sample_lattice_fusion(EncodingParams(3, 2, 1), ON_OFF, LossParams(1.0), rng)
    assert profile.q_lett == 0.5
    assert profile.q_sign == 0.5


@pytest.mark.parametrize("det,params", [
    (PNRD, EncodingParams(2, 2, 1)),
    (ON_OFF, EncodingParams(2, 3, 1)),
])
def test_lattice_sampling_frequencies(det, params):
    loss = LossParams(0.1)
    dist = lattice_profile_distribution(params, det, loss)
    keys = [pair for pair, _ in dist]
    expected = np.array([p for _, p in dist])
    rng = np.random.default_rng(3)
    draws = 20_000
    counts = np.zeros(len(keys))
    for _ in range(draws):
        profile = sample_lattice_fusion(params, det, loss, rng)
        pair = (round(profile.q_sign, 15), round(profile.q_lett, 15))
        counts[keys.index(pair)] += 1
    keep = expected > 0
    _, p_value = stats.chisquare(counts[keep], expected[keep] / expected[keep].sum() * draws)
    assert p_value > 1e-3


def test_unencoded_ideal_and_failure():
    rng = np.random.default_rng(4)
    profiles = [sample_unencoded_fusion(0.0, LossParams(0.0), rng) for _ in range(100)]
    assert all(p.q_sign == 0.0 and p.q_lett == 0.0 and not p.sign_error for p in profiles)
    profiles = [sample_unencoded_fusion(1.0, LossParams(0.0), rng) for _ in range(100)]
    assert all(p.q_sign == 0.5 and p.q_lett == 0.0 and not p.lett_error for p in profiles)


def test_unencoded_branch_frequencies():
    rng = np.random.default_rng(5)
    draws = 100_000
    profiles = [sample_unencoded_fusion(0.5, LossParams(0.1), rng) for _ in range(draws)]
    lost = sum(1 for p in profiles if p.q_lett == 0.5)
    failed = sum(1 for p in profiles if p.q_sign == 0.5 and p.q_lett == 0.0)
    for count, p in ((lost, 0.19), (failed, 0.405)):
        sigma = math.sqrt(draws * p * (1 - p))
        assert abs(count - draws * p) < 3 * sigma


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32 - 1))
def test_sampled_error_bits_respect_zero_probabilities(seed):
    rng = np.random.default_rng(seed)
    sampler = FusionSampler.unencoded(0.5, LossParams(0.2))
    q_sign, q_lett, sign_error, lett_error = sampler.sample(500, rng)
    assert not np.any(sign_error & (q_sign == 0.0))
    assert not np.any(lett_error & (q_lett == 0.0))
    assert np.all((q_sign >= 0) & (q_sign <= 0.5))


def test_vectorised_sampler_frequencies():
    sampler = FusionSampler.encoded(EncodingParams(2, 2, 1), PNRD, LossParams(0.05))
    rng = np.random.default_rng(6)
    draws = 1_000_000
    q_sign, q_lett, _, _ = sampler.sample(draws, rng)
    pairs = list(zip(sampler.q_sign, sampler.q_lett))
    counts = np.array([np.sum((q_sign == qs) & (q_lett == ql)) for qs, ql in pairs])
    keep = sampler.probs > 0
    _, p_value = stats.chisquare(counts[keep], sampler.probs[keep] / sampler.probs[keep].sum() * draws)
    assert p_value > 1e-3
