"""
Monte-Carlo campaigns: logical error rates, distance-crossing thresholds and sweeps
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.stats import norm

from models.config import DetectorModel, EncodingParams, LossParams, ModelConfig
from models.results import LogicalErrorEstimate, ThresholdRecord
from services.bsm_enumeration import brute_force_block_table, brute_force_lattice_errors
from services.bsm_model import block_event_table, lattice_error_rates, lattice_event_probs
from services.decoder import brute_force_min_weight, build_matching_problem, decode
from services.errors import DecodeError, NoThresholdError, ParameterError
from services.lattice_sim import QubitRecords, RhgLattice, Syndrome, TrialRunner, judge_logical_error
from services.provenance import build_id
from services.resources import build_merging_graph, replay_merging_graph

logger = logging.getLogger(__name__)

Z_99 = float(norm.ppf(0.995))
TARGET_RATIO = 0.1
ORACLE_TOLERANCE = 1e-12

Estimator = Callable[[ModelConfig, float, int], LogicalErrorEstimate]


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream of one trial, identical in serial and parallel runs"""
    return np.random.default_rng([seed, index])


def confidence_interval(errors: int, trials: int, method: str = "normal") -> Tuple[float, float]:
    """
    Point estimate and 99% half-width of a logical error rate

    The normal method returns (errors / trials, z * standard error). The Wilson
    method returns the centre and half-width of the Wilson score interval.
    """
    if trials <= 0:
        raise ParameterError("no trials")
    p = errors / trials
    z = Z_99
    if method == "normal":
        return p, z * math.sqrt(p * (1.0 - p) / trials)
    if method == "wilson":
        denom = 1.0 + z * z / trials
        centre = (p + z * z / (2.0 * trials)) / denom
        half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
        return centre, half
    raise ParameterError(f"unknown ci_method {method!r}")


def count_logical_errors(runner: TrialRunner, seed: int, start: int, count: int) -> int:
    """
    Decode trials start..start+count-1 and count logical errors

    A trial whose syndrome cannot be matched counts as a logical error.
    """
    errors = 0
    lattice = runner.lattice
    for index in range(start, start + count):
        trial = runner.run(trial_rng(seed, index))
        try:
            correction = decode(build_matching_problem(trial.syndrome, trial.records, lattice))
        except DecodeError as e:
            logger.debug("trial %d counted as a logical error: %s", index, e)
            errors += 1
            continue
        errors += judge_logical_error(trial.primal_errors, correction.errors, lattice)
    return errors


_WORKER_RUNNERS: Dict[str, TrialRunner] = {}


def _worker_count(cfg_json: str, seed: int, start: int, count: int) -> int:
    runner = _WORKER_RUNNERS.get(cfg_json)
    if runner is None:
        runner = _WORKER_RUNNERS[cfg_json] = TrialRunner(ModelConfig.from_json(cfg_json))
    return count_logical_errors(runner, seed, start, count)


def _split(start: int, count: int, parts: int) -> List[Tuple[int, int]]:
    size = -(-count // parts)
    return [(s, min(size, start + count - s)) for s in range(start, start + count, size)]


def estimate_logical_error(cfg: ModelConfig, eta: Optional[float] = None,
                           seed: Optional[int] = None) -> LogicalErrorEstimate:
    """
    Logical error rate with a 99% confidence half-width

    Runs batches of trials until at least `min_errors` logical errors were seen
    and delta_p_L / p_L <= 0.1. A run without any logical error stops after
    `zero_failure_trials` (default max_trials) and reports the rule-of-three
    bound 3 / trials, flagged zero_failure and not converged. A scenario that
    cannot produce errors at all (no loss, no heralded q) stops after one batch.

    Args:
        cfg: scenario
        eta: loss rate overriding cfg.eta
        seed: master seed overriding cfg.seed

    Returns:
        LogicalErrorEstimate; `converged` is False when max_trials ran out first
    """
    if eta is not None:
        cfg = cfg.with_changes(eta=eta)
    seed = cfg.seed if seed is None else seed
    runner = TrialRunner(cfg)
    echo = cfg.to_dict()
    echo["seed"] = seed

    def finish(p, delta, trials, errors, converged, zero_failure=False):
        return LogicalErrorEstimate(
            eta=cfg.eta, d=cfg.d, p_L=p, delta_p_L=delta, trials=trials, errors=errors,
            converged=converged, zero_failure=zero_failure, config=echo, build_id=build_id(),
        )

    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    cfg_json = cfg.to_json()
    error_free = runner.error_free
    budget = cfg.max_trials if cfg.zero_failure_trials is None else min(cfg.zero_failure_trials, cfg.max_trials)
    trials = errors = 0
    try:
        while trials < cfg.max_trials:
            count = min(cfg.batch_size, cfg.max_trials - trials)
            if pool is None:
                errors += count_logical_errors(runner, seed, trials, count)
            else:
                chunks = _split(trials, count, cfg.workers)
                errors += sum(pool.map(_worker_count, *zip(*[(cfg_json, seed, s, c) for s, c in chunks])))
            trials += count
            p, delta = confidence_interval(errors, trials, cfg.ci_method)
            logger.info("d=%d eta=%.5f: %d errors in %d trials (p_L=%.4g +- %.2g)",
                        cfg.d, cfg.eta, errors, trials, p, delta)
            if errors == 0 and (error_free or trials >= budget):
                return finish(0.0, 3.0 / trials, trials, 0, error_free, zero_failure=True)
            if errors >= cfg.min_errors and p > 0 and delta / p <= TARGET_RATIO:
                return finish(p, delta, trials, errors, True)
    finally:
        if pool is not None:
            pool.shutdown()

    logger.warning("d=%d eta=%.5f did not converge within %d trials", cfg.d, cfg.eta, cfg.max_trials)
    if errors == 0:
        return finish(0.0, 3.0 / trials, trials, 0, False, zero_failure=True)
    p, delta = confidence_interval(errors, trials, cfg.ci_method)
    return finish(p, delta, trials, errors, False)


def find_threshold(cfg: ModelConfig, d_small: int, d_large: int, eta_grid: Sequence[float],
                   seed: Optional[int] = None, estimator: Estimator = estimate_logical_error) -> ThresholdRecord:
    """
    Largest grid loss rate at which the larger code is clearly better

    A grid point qualifies when p_L(d_large) + delta < p_L(d_small) - delta.

    Raises:
        ParameterError: distances not increasing or grid not ascending
        NoThresholdError: no grid point qualifies
    """
    if not d_small < d_large:
        raise ParameterError(f"need d_small < d_large, got {d_small}, {d_large}")
    grid = [float(e) for e in eta_grid]
    if not grid or any(a >= b for a, b in zip(grid, grid[1:])):
        raise ParameterError("eta grid must be non-empty and strictly ascending")
    seed = cfg.seed if seed is None else seed
    small_cfg, large_cfg = cfg.with_changes(d=d_small), cfg.with_changes(d=d_large)

    rows = []
    below = []
    for eta in grid:
        small = estimator(small_cfg, eta, seed)
        large = estimator(large_cfg, eta, seed)
        rows.extend([small, large])
        if large.upper < small.lower:
            below.append(eta)
        logger.info("eta=%.5f: p_L(%d)=%.4g p_L(%d)=%.4g", eta, d_small, small.p_L, d_large, large.p_L)
    if not below:
        raise NoThresholdError(f"no crossing of d={d_small} and d={d_large} on the grid")
    return ThresholdRecord(max(below), d_small, d_large, rows, cfg.to_dict(), build_id())


def sweep(cfg: ModelConfig, etas: Sequence[float], seed: Optional[int] = None,
          estimator: Estimator = estimate_logical_error) -> List[LogicalErrorEstimate]:
    """Plot-ready logical error rates over a list of loss rates"""
    seed = cfg.seed if seed is None else seed
    return [estimator(cfg, float(eta), seed) for eta in etas]


@dataclass
class SelfTestResult:
    name: str
    passed: bool
    detail: str


def _max_table_deviation(params: EncodingParams, det: DetectorModel, loss: LossParams) -> float:
    analytic = block_event_table(params, det, loss)
    enumerated = brute_force_block_table(params, det, loss)
    worst = 0.0
    for a, b in zip(analytic, enumerated):
        worst = max(worst, abs(a.probability - b.probability))
        if b.probability > 1e-14:
            worst = max(worst, abs(a.q_sign - b.q_sign), abs(a.q_lett - b.q_lett))
    return worst


def _check_block_tables() -> SelfTestResult:
    worst = 0.0
    for det in DetectorModel:
        for m in (1, 2, 3):
            for j in range(m):
                for eta in (0.0, 0.05, 0.2):
                    worst = max(worst, _max_table_deviation(EncodingParams(1, m, j), det, LossParams(eta)))
    return SelfTestResult("block event tables", worst <= ORACLE_TOLERANCE, f"max deviation {worst:.2e}")


def _check_lattice_errors() -> SelfTestResult:
    worst = 0.0
    for n in (1, 2, 3):
        for m in (1, 2, 3):
            for j in range(m):
                for eta in (0.0, 0.05, 0.2):
                    params, loss = EncodingParams(n, m, j), LossParams(eta)
                    exact = brute_force_lattice_errors(params, DetectorModel.ON_OFF, loss)
                    closed = lattice_error_rates(params, DetectorModel.ON_OFF, loss)
                    worst = max(worst, abs(exact[0] - closed[0]), abs(exact[1] - closed[1]))
                    if n <= 2 and m <= 2:
                        probs = lattice_event_probs(params, loss)
                        q_sign, q_lett = brute_force_lattice_errors(params, DetectorModel.PNRD_TWO, loss)
                        worst = max(worst, abs(q_sign - 0.5 * (probs.P_DL + probs.P_F)),
                                    abs(q_lett - 0.5 * (probs.P_DS + probs.P_F)))
    return SelfTestResult("lattice error rates", worst <= ORACLE_TOLERANCE, f"max deviation {worst:.2e}")


def _check_decoder(rng: np.random.Generator, instances: int) -> SelfTestResult:
    lattice = RhgLattice.build(2, 2, 2)
    worst = 0.0
    for _ in range(instances):
        records = QubitRecords.fresh(lattice.num_qubits)
        records.r[:lattice.n_primal] = 1.0 - 2.0 * rng.uniform(0.01, 0.49, lattice.n_primal)
        violated = np.zeros(lattice.num_cells, dtype=bool)
        picks = rng.choice(lattice.num_cells, size=min(lattice.num_cells, int(rng.integers(1, 9))), replace=False)
        violated[picks] = True
        problem = build_matching_problem(Syndrome(violated), records, lattice)
        worst = max(worst, abs(decode(problem).weight - brute_force_min_weight(problem)))
    return SelfTestResult("decoder optimality", worst <= 1e-9, f"{instances} instances, max gap {worst:.2e}")


def _check_merging_graphs(rng: np.random.Generator) -> SelfTestResult:
    graphs = [nx.star_graph(3), nx.path_graph(5), nx.cycle_graph(4), nx.complete_graph(4)]
    failures = 0
    for g in graphs:
        rebuilt = replay_merging_graph(build_merging_graph(g, rng), rng)
        if rebuilt is None or {frozenset(e) for e in rebuilt.edges} != {frozenset(e) for e in g.edges}:
            failures += 1
    return SelfTestResult("merging graph replay", failures == 0, f"{len(graphs) - failures}/{len(graphs)} rebuilt")


def run_selftest(seed: int = 0, decoder_instances: int = 500) -> List[SelfTestResult]:
    """Compare closed forms, the decoder and merging graphs against brute-force oracles"""
    rng = np.random.default_rng(seed)
    results = [
        _check_block_tables(),
        _check_lattice_errors(),
        _check_decoder(rng, decoder_instances),
        _check_merging_graphs(rng),
    ]
    for r in results:
        if r.passed:
            logger.info("selftest %s: %s", r.name, r.detail)
        else:
            logger.error("selftest %s failed: %s", r.name, r.detail)
    return results
