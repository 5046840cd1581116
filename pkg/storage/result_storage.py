"""
Result files and config files of simulation campaigns
"""
import csv
import json
import os
from typing import Dict, Iterable, List, Optional

from dotenv import dotenv_values

from models.config import ModelConfig
from models.results import LogicalErrorEstimate, ResourceRow, ThresholdRecord
from services.errors import ParameterError

# config echo columns appended to every logical-error row
CONFIG_COLUMNS = ["encoding", "pssl", "hic", "pnrd", "n", "m", "j", "p_fail", "seed", "ci_method"]

ESTIMATE_COLUMNS = [
    "eta", "d", "p_L", "delta_p_L", "trials", "errors", "converged", "zero_failure",
] + CONFIG_COLUMNS + ["build_id"]

RESOURCE_COLUMNS = [
    "n", "m", "config", "detector", "pssl", "eta",
    "n_central", "n_side", "p_succ_step1", "n_ghz_star", "samples",
    "j", "encoding", "hic", "pnrd", "p_fail", "d", "seed", "build_id",
]


def load_config(path: str, overrides: Optional[Dict[str, str]] = None) -> ModelConfig:
    """
    Read a flat `key = value` config file; overrides (CLI flags) win

    Raises:
        ParameterError: file missing or values invalid
    """
    if not os.path.exists(path):
        raise ParameterError(f"Config file not found: {path}")
    values = dict(dotenv_values(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ModelConfig.from_mapping(values)


def _estimate_row(est: LogicalErrorEstimate) -> dict:
    row = est.to_dict()
    config = row.pop("config")
    enc = config.get("enc_params") or {}
    for key in CONFIG_COLUMNS:
        row[key] = enc.get(key) if key in ("n", "m", "j") else config.get(key)
    return row


def _resource_row(res: ResourceRow) -> dict:
    row = res.to_dict()
    echo = row.pop("config_echo")
    for key in ("encoding", "hic", "pnrd", "p_fail", "d", "seed"):
        row[key] = echo.get(key)
    return row


class ResultStorage:
    """Writes campaign results as CSV and JSON lines under one directory"""

    def __init__(self, storage_dir: str = "results"):
        self.storage_dir = storage_dir
        os.makedirs(self.storage_dir, exist_ok=True)

    def path(self, name: str, suffix: str) -> str:
        return os.path.join(self.storage_dir, f"{name}.{suffix}")

    def _write_csv(self, name: str, columns: List[str], rows: Iterable[dict]) -> str:
        path = self.path(name, "csv")
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        return path

    def _write_jsonl(self, name: str, lines: Iterable[str]) -> str:
        path = self.path(name, "jsonl")
        with open(path, "w") as f:
            for line in lines:
                f.write(line + "\n")
        return path

    def save_estimates(self, name: str, estimates: List[LogicalErrorEstimate]) -> List[str]:
        """Save logical-error rows; returns the written paths"""
        return [
            self._write_csv(name, ESTIMATE_COLUMNS, (_estimate_row(e) for e in estimates)),
            self._write_jsonl(name, (e.to_json() for e in estimates)),
        ]

    def load_estimates(self, name: str) -> List[LogicalErrorEstimate]:
        """Load logical-error rows from the JSON-lines file"""
        try:
            with open(self.path(name, "jsonl")) as f:
                return [LogicalErrorEstimate.from_json(line) for line in f if line.strip()]
        except FileNotFoundError:
            return []

    def save_threshold(self, name: str, record: ThresholdRecord) -> List[str]:
        """Save the curves as CSV and the full record as one JSON line"""
        return [
            self._write_csv(name, ESTIMATE_COLUMNS, (_estimate_row(e) for e in record.rows)),
            self._write_jsonl(name, [record.to_json()]),
        ]

    def load_threshold(self, name: str) -> Optional[ThresholdRecord]:
        try:
            with open(self.path(name, "jsonl")) as f:
                return ThresholdRecord.from_dict(json.loads(f.readline()))
        except (json.JSONDecodeError, FileNotFoundError):
            return None

    def save_resources(self, name: str, rows: List[ResourceRow]) -> List[str]:
        """Save resource rows"""
        return [
            self._write_csv(name, RESOURCE_COLUMNS, (_resource_row(r) for r in rows)),
            self._write_jsonl(name, (r.to_json() for r in rows)),
        ]

    def load_resources(self, name: str) -> List[ResourceRow]:
        try:
            with open(self.path(name, "jsonl")) as f:
                return [ResourceRow.from_dict(json.loads(line)) for line in f if line.strip()]
        except FileNotFoundError:
            return []
