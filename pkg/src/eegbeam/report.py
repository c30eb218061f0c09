"""Run reports: a JSON document plus an optional per-point CSV table."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

SCHEMA_VERSION = 1


@dataclass
class RunReport:
    """Everything a command measured.

    ``timing`` holds wall-clock seconds and is the only section allowed to
    differ between two runs with the same inputs and flags.
    """

    command: str
    config: dict[str, Any]
    points: list[dict[str, Any]] = field(default_factory=list)
    rankings: dict[str, list[int]] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)
    flops: dict[str, Any] = field(default_factory=dict)
    timing: dict[str, float] = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RunReport":
        return cls(**doc)

    def to_json(self) -> str:
        _check_finite(self.metrics, "metrics")
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def deterministic(self) -> dict[str, Any]:
        doc = self.to_dict()
        doc.pop("timing")
        return doc

    def write(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def write_csv(self, path) -> None:
        if not self.points:
            Path(path).write_text("")
            return
        columns = list(self.points[0])
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            for row in self.points:
                writer.writerow({c: _csv_cell(row.get(c)) for c in columns})


def _csv_cell(value):
    if isinstance(value, (list, tuple)):
        return " ".join(repr(v) for v in value)
    return "" if value is None else value


def _check_finite(node, where: str) -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            _check_finite(value, f"{where}.{key}")
    elif isinstance(node, (list, tuple)):
        for i, value in enumerate(node):
            _check_finite(value, f"{where}[{i}]")
    elif isinstance(node, float) and not math.isfinite(node):
        raise ValueError(f"report metric {where} is not finite: {node}")
