"""
Loss-tolerance simulator - command line entry point
"""
import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

from dotenv import load_dotenv

from models.config import ModelConfig
from services.campaign import find_threshold, run_selftest, sweep
from services.errors import NoThresholdError, ParameterError, SimulationError
from services.resources import resource_row
from services.theory import p_intact, solve_threshold
from storage.result_storage import ResultStorage, load_config

logger = logging.getLogger("main")

DESK_DISTANCES = (3, 5)
LARGE_DISTANCES = (9, 11)


def parse_floats(text: str) -> List[float]:
    """Comma-separated list of floats"""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ParameterError(f"Not a list of numbers: {text!r}") from e


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--encoding", action="store_const", const="true", help="use parity-state encoding")
    parser.add_argument("--pssl", action="store_const", const="true", help="post-select step-1 fusions")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--hic", dest="hic", action="store_const", const="true")
    group.add_argument("--his", dest="hic", action="store_const", const="false")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--pnrd", dest="pnrd", action="store_const", const="true")
    group.add_argument("--onoff", dest="pnrd", action="store_const", const="false")
    parser.add_argument("--n", type=int)
    parser.add_argument("--m", type=int)
    parser.add_argument("--j", type=int)
    parser.add_argument("--d", type=int)
    parser.add_argument("--eta", help="loss rate, or a comma-separated list")
    parser.add_argument("--pfail", dest="p_fail", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--max-trials", dest="max_trials", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--ci", dest="ci_method", choices=["normal", "wilson"])
    parser.add_argument("--out", help="result file name (without suffix)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Loss-tolerance simulator for fusion-based RHG lattices")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="estimate logical error rates")
    _add_scenario_flags(simulate)

    threshold = sub.add_parser("threshold", help="find the distance-crossing loss threshold")
    _add_scenario_flags(threshold)
    threshold.add_argument("--d-pair", dest="d_pair", help="two distances, e.g. 3,5")
    threshold.add_argument("--large-distances", action="store_true", help="use distances 9 and 11")
    threshold.add_argument("--eta-grid", dest="eta_grid", required=True, help="ascending comma-separated loss rates")

    resources = sub.add_parser("resources", help="expected 3-GHZ states per central qubit")
    _add_scenario_flags(resources)

    theory = sub.add_parser("theory", help="percolation threshold estimate (unencoded)")
    theory.add_argument("--pfail", dest="p_fail", default="0.5", help="failure rate, or a comma-separated list")
    theory.add_argument("--pssl", action="store_true")

    selftest = sub.add_parser("selftest", help="compare closed forms against brute-force oracles")
    selftest.add_argument("--seed", type=int, default=0)
    return parser


def scenario_from_args(args: argparse.Namespace) -> ModelConfig:
    """Config file values overridden by command-line flags"""
    keys = ["encoding", "pssl", "hic", "pnrd", "n", "m", "j", "d", "p_fail", "seed",
            "max_trials", "workers", "ci_method"]
    overrides: Dict[str, Optional[str]] = {
        k: str(getattr(args, k)) for k in keys if getattr(args, k, None) is not None
    }
    etas = parse_floats(args.eta) if args.eta else []
    if etas:
        overrides["eta"] = str(etas[0])
    if args.config:
        return load_config(args.config, overrides)
    return ModelConfig.from_mapping(overrides)


def _etas(args: argparse.Namespace, cfg: ModelConfig) -> List[float]:
    return parse_floats(args.eta) if args.eta else [cfg.eta]


def run_simulate(args, storage: ResultStorage) -> int:
    cfg = scenario_from_args(args)
    rows = sweep(cfg, _etas(args, cfg))
    for row in rows:
        print(f"eta={row.eta:.6g} d={row.d} p_L={row.p_L:.6g} +- {row.delta_p_L:.3g} "
              f"trials={row.trials} converged={row.converged} zero_failure={row.zero_failure}")
    for path in storage.save_estimates(args.out or "simulate", rows):
        print(f"wrote {path}")
    return 0


def run_threshold(args, storage: ResultStorage) -> int:
    cfg = scenario_from_args(args)
    if args.large_distances:
        d_small, d_large = LARGE_DISTANCES
    elif args.d_pair:
        pair = [int(x) for x in parse_floats(args.d_pair)]
        if len(pair) != 2:
            raise ParameterError(f"--d-pair needs two distances, got {args.d_pair!r}")
        d_small, d_large = pair
    else:
        d_small, d_large = DESK_DISTANCES
    record = find_threshold(cfg, d_small, d_large, parse_floats(args.eta_grid))
    print(f"eta_th={record.eta_th:.6g} (d={d_small},{d_large})")
    for path in storage.save_threshold(args.out or "threshold", record):
        print(f"wrote {path}")
    return 0


def run_resources(args, storage: ResultStorage) -> int:
    cfg = scenario_from_args(args)
    rows = [resource_row(cfg.with_changes(eta=eta)) for eta in _etas(args, cfg)]
    for row in rows:
        print(f"eta={row.eta:.6g} N_central={row.n_central:.6g} N_side={row.n_side:.6g} "
              f"N_star={row.n_ghz_star:.6g}")
    for path in storage.save_resources(args.out or "resources", rows):
        print(f"wrote {path}")
    return 0


def run_theory(args) -> int:
    print("p_fail,pssl,p_intact_at_0,eta_th")
    for p_fail in parse_floats(args.p_fail):
        head = f"{p_fail},{args.pssl},{p_intact(0.0, p_fail, args.pssl):.10g}"
        try:
            eta_th = solve_threshold(p_fail, args.pssl)
        except NoThresholdError as e:
            logger.warning("%s", e)
            print(f"{head},none")
            continue
        print(f"{head},{eta_th:.10g}")
    return 0


def run_selftest_command(args) -> int:
    results = run_selftest(seed=args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    load_dotenv()
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        if args.command == "theory":
            return run_theory(args)
        if args.command == "selftest":
            return run_selftest_command(args)
        storage = ResultStorage(os.getenv("RESULTS_DIR", "results"))
        if args.command == "simulate":
            return run_simulate(args, storage)
        if args.command == "threshold":
            return run_threshold(args, storage)
        return run_resources(args, storage)
    except SimulationError as e:
        logger.error("%s", e)
        return 1


if __name__ == '__main__':
    sys.exit(main())
