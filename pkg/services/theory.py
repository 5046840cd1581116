"""
Percolation-based threshold estimate for the unencoded scheme
"""
import logging

from scipy.optimize import brentq

from services.errors import NoThresholdError, check_probability

logger = logging.getLogger(__name__)

# bond percolation threshold of the simple cubic lattice
P_PRC = 0.249

ROOT_TOL = 1e-12


def p_intact(eta: float, p_fail: float, pssl: bool) -> float:
    """
    Probability that a bond of the percolation picture is intact

    Without post-selection a bond needs four successful fusions and 21 surviving
    photons; with post-selected step-1 fusions, two fusions and 9 photons.
    """
    eta = check_probability(eta, "eta")
    p_fail = check_probability(p_fail, "p_fail")
    if pssl:
        return (1.0 - p_fail) ** 2 * (1.0 - eta) ** 9
    return (1.0 - p_fail) ** 4 * (1.0 - eta) ** 21


def solve_threshold(p_fail: float, pssl: bool, tol: float = ROOT_TOL) -> float:
    """
    Loss threshold where p_intact drops to 1 - P_PRC

    Args:
        p_fail: fusion failure rate
        pssl: whether step-1 fusions are post-selected
        tol: absolute tolerance on eta

    Returns:
        eta_th in [0, 1]

    Raises:
        NoThresholdError: p_fail alone already breaks percolation
    """
    target = 1.0 - P_PRC
    if p_intact(0.0, p_fail, pssl) < target:
        raise NoThresholdError(f"no loss threshold for p_fail={p_fail} (pssl={pssl})")
    eta_th = brentq(lambda eta: p_intact(eta, p_fail, pssl) - target, 0.0, 1.0, xtol=tol)
    logger.debug("percolation threshold p_fail=%s pssl=%s -> eta_th=%.10f", p_fail, pssl, eta_th)
    return eta_th
