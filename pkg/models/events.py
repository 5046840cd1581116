"""
Outcome records of block- and lattice-level Bell-state measurements
"""
from dataclasses import dataclass, asdict
from typing import Dict, List, Tuple
import json


@dataclass(frozen=True)
class BlockEvent:
    """One coarse-grained outcome class of a block-level BSM"""
    event_id: str
    probability: float
    q_sign: float
    q_lett: float


@dataclass(frozen=True)
class BlockEventTable:
    """Ordered event list of a block-level BSM"""
    events: Tuple[BlockEvent, ...]

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def __getitem__(self, event_id: str) -> BlockEvent:
        for event in self.events:
            if event.event_id == event_id:
                return event
        raise KeyError(event_id)

    @property
    def ids(self) -> List[str]:
        return [e.event_id for e in self.events]

    @property
    def probabilities(self) -> List[float]:
        return [e.probability for e in self.events]

    def total(self) -> float:
        return sum(self.probabilities)

    def as_dict(self) -> Dict[str, BlockEvent]:
        return {e.event_id: e for e in self.events}

    def to_dict(self) -> dict:
        return {"events": [asdict(e) for e in self.events]}

    @classmethod
    def from_dict(cls, data: dict) -> 'BlockEventTable':
        return cls(tuple(BlockEvent(**e) for e in data["events"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class FusionErrorProfile:
    """Heralded error probabilities of one fusion plus the sampled error bits"""
    q_sign: float
    q_lett: float
    sign_error: bool = False
    lett_error: bool = False

    def swapped(self) -> 'FusionErrorProfile':
        """Sign and letter roles exchanged (HIS step-1 fusions)"""
        return FusionErrorProfile(self.q_lett, self.q_sign, self.lett_error, self.sign_error)

    def to_dict(self) -> dict:
        return asdict(self)


IDEAL_PROFILE = FusionErrorProfile(0.0, 0.0, False, False)


@dataclass(frozen=True)
class LatticeEventProbs:
    """Lattice-level BSM event probabilities with PNRDs"""
    P_S: float
    P_DL: float
    P_DS: float
    P_F: float

    # (q_sign, q_lett) heralded by each event
    PROFILES = {
        "S": (0.0, 0.0),
        "DL": (0.5, 0.0),
        "DS": (0.0, 0.5),
        "F": (0.5, 0.5),
    }

    def as_list(self) -> List[float]:
        return [self.P_S, self.P_DL, self.P_DS, self.P_F]

    def total(self) -> float:
        return sum(self.as_list())

    def to_dict(self) -> dict:
        return asdict(self)
