"""
Parameter records describing a simulation scenario
"""
from dataclasses import dataclass, asdict, field
from enum import Enum
from typing import Mapping, Optional
import json

from services.errors import ParameterError, check_probability


_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def parse_bool(value) -> bool:
    """Parse a config-file boolean"""
    if isinstance(value, bool):
        return value
    word = str(value).strip().lower()
    if word in _TRUE_WORDS:
        return True
    if word in _FALSE_WORDS:
        return False
    raise ParameterError(f"Not a boolean: {value!r}")


class DetectorModel(Enum):
    """Photodetectors used by the physical-level BSMs"""
    PNRD_TWO = "pnrd"
    ON_OFF = "onoff"


@dataclass(frozen=True)
class EncodingParams:
    """(n, m) parity state code plus the B_psi attempt limit j"""
    n: int
    m: int
    j: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ParameterError(f"n and m must be positive, got n={self.n}, m={self.m}")
        if not 0 <= self.j <= self.m - 1:
            raise ParameterError(f"j must satisfy 0 <= j <= m - 1, got j={self.j} for m={self.m}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'EncodingParams':
        return cls(int(data["n"]), int(data["m"]), int(data["j"]))


@dataclass(frozen=True)
class LossParams:
    """Uniform photon loss rate; x is the probability a photon pair survives"""
    eta: float

    def __post_init__(self):
        check_probability(self.eta, "eta")

    @property
    def x(self) -> float:
        return (1.0 - self.eta) ** 2


@dataclass
class ModelConfig:
    """Full parameter record of one simulation scenario"""
    encoding: bool = False
    pssl: bool = False
    hic: bool = True
    pnrd: bool = True
    d: int = 3
    eta: float = 0.0
    p_fail: float = 0.5
    enc_params: Optional[EncodingParams] = None
    seed: int = 0
    max_trials: int = 1_000_000
    batch_size: int = 1000
    min_errors: int = 100
    ci_method: str = "normal"
    # None: only a run of max_trials without a logical error is a zero-failure row
    zero_failure_trials: Optional[int] = None
    workers: int = 1
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> 'ModelConfig':
        """Check invariants; an unencoded scheme always runs HIC"""
        if not self.encoding:
            self.hic = True
        elif self.enc_params is None:
            raise ParameterError("encoding requires n, m and j")
        if self.d < 3 or self.d % 2 == 0:
            raise ParameterError(f"code distance must be odd and >= 3, got {self.d}")
        check_probability(self.eta, "eta")
        check_probability(self.p_fail, "p_fail")
        if self.ci_method not in ("normal", "wilson"):
            raise ParameterError(f"unknown ci_method {self.ci_method!r}")
        if self.batch_size < 1 or self.max_trials < 1:
            raise ParameterError("batch_size and max_trials must be positive")
        if self.zero_failure_trials is not None and self.zero_failure_trials < 1:
            raise ParameterError("zero_failure_trials must be positive")
        return self

    @property
    def detector(self) -> DetectorModel:
        return DetectorModel.PNRD_TWO if self.pnrd else DetectorModel.ON_OFF

    @property
    def loss(self) -> LossParams:
        return LossParams(self.eta)

    def with_changes(self, **changes) -> 'ModelConfig':
        """Copy with some fields replaced"""
        data = self.to_dict()
        data.update(changes)
        return ModelConfig.from_dict(data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop("extra")
        data["enc_params"] = self.enc_params.to_dict() if self.enc_params else None
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'ModelConfig':
        data = dict(data)
        data.pop("extra", None)
        enc = data.get("enc_params")
        if isinstance(enc, dict):
            data["enc_params"] = EncodingParams.from_dict(enc)
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, json_str: str) -> 'ModelConfig':
        return cls.from_dict(json.loads(json_str))

    @classmethod
    def from_mapping(cls, values: Mapping[str, Optional[str]]) -> 'ModelConfig':
        """
        Build a config from flat string key/value pairs (config file or CLI)

        Args:
            values: keys as in the simulation parameter list; unknown keys are kept in `extra`

        Returns:
            Validated ModelConfig
        """
        values = {str(k).strip().lower(): v for k, v in values.items()}
        kwargs = {}
        extra = {}
        converters = {
            "encoding": parse_bool, "pssl": parse_bool, "hic": parse_bool, "pnrd": parse_bool,
            "d": int, "eta": float, "p_fail": float, "seed": int, "max_trials": int,
            "batch_size": int, "min_errors": int, "ci_method": str,
            "zero_failure_trials": int, "workers": int,
        }
        for key, raw in values.items():
            if raw is None or raw == "":
                continue
            if key in converters:
                try:
                    kwargs[key] = converters[key](raw)
                except ValueError as e:
                    raise ParameterError(f"Bad value for {key}: {raw!r}") from e
            elif key not in ("n", "m", "j"):
                extra[key] = raw
        if all(values.get(k) not in (None, "") for k in ("n", "m", "j")):
            kwargs["enc_params"] = EncodingParams(int(values["n"]), int(values["m"]), int(values["j"]))
        return cls(extra=extra, **kwargs)
