"""
Exception hierarchy shared by the simulation services
"""


class SimulationError(Exception):
    """Base class for every error raised by the simulator"""


class ParameterError(SimulationError):
    """Invalid encoding parameters, code distance or configuration"""


class RangeError(SimulationError):
    """A probability-like input lies outside [0, 1]"""


class UsageError(SimulationError):
    """An operation was called in a mode it does not support"""


class UnsupportedCombinationError(SimulationError):
    """The requested parameter combination has no defined model"""


class NoThresholdError(SimulationError):
    """No threshold exists (theory) or none was found on the grid (campaign)"""


class DecodeError(SimulationError):
    """A defect cannot be paired with any other defect or boundary"""


class InfiniteCostError(SimulationError):
    """Merging never succeeds, so the expected resource cost diverges"""


def check_probability(value: float, name: str) -> float:
    """Return value as float, raising RangeError when it is not in [0, 1]"""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise RangeError(f"{name} must lie in [0, 1], got {value}")
    return value
