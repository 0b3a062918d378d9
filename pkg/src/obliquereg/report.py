"""Structured record of measured norms, ratios, slopes and orders."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["NormReport", "to_jsonable"]


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class NormReport:
    """Named scalar measurements, each tagged with the resolution it was computed at.

    ``kind`` is one of ``norm``, ``ratio``, ``slope``, ``order``, ``check`` or ``count``.
    """

    entries: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)

    def add(self, name: str, value, grid="analytic", kind: str = "norm", **extra) -> None:
        self.entries[name] = {"value": value, "grid": grid, "kind": kind, **extra}

    def __getitem__(self, name: str):
        return self.entries[name]["value"]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def warn(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)

    def merge(self, other: "NormReport", prefix: str = "") -> None:
        for k, v in other.entries.items():
            self.entries[prefix + k] = dict(v)
        for w in other.warnings:
            self.warn(w)
        self.verdicts.extend(other.verdicts)

    def to_dict(self) -> dict:
        return to_jsonable({
            "entries": dict(sorted(self.entries.items())),
            "metadata": dict(sorted(self.metadata.items())),
            "warnings": list(self.warnings),
            "verdicts": list(self.verdicts),
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value", "grid", "kind"])
        for name, e in sorted(self.entries.items()):
            w.writerow([name, to_jsonable(e["value"]), to_jsonable(e["grid"]), e["kind"]])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, data: dict) -> "NormReport":
        return cls(entries=dict(data.get("entries", {})), metadata=dict(data.get("metadata", {})),
                   warnings=list(data.get("warnings", [])), verdicts=list(data.get("verdicts", [])))
