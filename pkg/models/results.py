"""
Result records emitted by campaigns
"""
from dataclasses import dataclass, asdict, field
from typing import List, Optional
import json


@dataclass
class LogicalErrorEstimate:
    """Logical error rate of one scenario with its 99% confidence half-width"""
    eta: float
    d: int
    p_L: float
    delta_p_L: float
    trials: int
    errors: int
    converged: bool = True
    zero_failure: bool = False
    config: dict = field(default_factory=dict)
    build_id: str = "unknown"

    @property
    def lower(self) -> float:
        return self.p_L - self.delta_p_L

    @property
    def upper(self) -> float:
        return self.p_L + self.delta_p_L

    def to_dict(self) -> dict:
        """Convert estimate to dictionary"""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'LogicalErrorEstimate':
        """Create estimate from dictionary"""
        return cls(**data)

    def to_json(self) -> str:
        """Convert estimate to a single-line JSON string"""
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, json_str: str) -> 'LogicalErrorEstimate':
        return cls.from_dict(json.loads(json_str))


@dataclass
class ThresholdRecord:
    """Distance-crossing threshold and the curves it was read from"""
    eta_th: float
    d_small: int
    d_large: int
    rows: List[LogicalErrorEstimate] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    build_id: str = "unknown"

    def to_dict(self) -> dict:
        data = asdict(self)
        data["rows"] = [r.to_dict() for r in self.rows]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'ThresholdRecord':
        data = dict(data)
        data["rows"] = [LogicalErrorEstimate.from_dict(r) for r in data.get("rows", [])]
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class ResourceRow:
    """Expected 3-GHZ cost of one star cluster"""
    n: Optional[int]
    m: Optional[int]
    config: str
    detector: str
    pssl: bool
    eta: float
    n_central: float
    n_side: float
    p_succ_step1: float
    n_ghz_star: float
    samples: int
    j: Optional[int] = None
    config_echo: dict = field(default_factory=dict)
    build_id: str = "unknown"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'ResourceRow':
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
