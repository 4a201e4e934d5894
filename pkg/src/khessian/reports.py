"""Inequality reports and deterministic JSON/CSV serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

TOL_EQ_CLOSED_FORM = 1e-6
TOL_EQ_GRID = 1e-3


@dataclass
class InequalityReport:
    """One checked inequality ``lhs >= rhs``; ``slack >= 0`` means it holds."""

    name: str
    lhs: float
    rhs: float
    slack: float
    relative_slack: float
    equality: bool
    tol_eq: float
    resolution: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @classmethod
    def build(cls, name, lhs, rhs, tol_eq=TOL_EQ_CLOSED_FORM, resolution=None, details=None):
        lhs = float(lhs)
        rhs = float(rhs)
        slack = lhs - rhs
        scale = max(abs(lhs), abs(rhs))
        rel = slack / scale if scale > 0 else 0.0
        return cls(
            name=name,
            lhs=lhs,
            rhs=rhs,
            slack=slack,
            relative_slack=rel,
            equality=abs(rel) < tol_eq,
            tol_eq=tol_eq,
            resolution=dict(resolution or {}),
            details=dict(details or {}),
        )

    def holds(self, tol: float = 0.0) -> bool:
        return self.slack >= -tol

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "relative_slack": self.relative_slack,
            "equality": self.equality,
            "resolution": self.resolution,
        }
        if self.details:
            out["details"] = self.details
        return out


def _to_plain(obj: Any) -> Any:
    if hasattr(obj, "to_dict"):
        return _to_plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _emit(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [pad + _emit(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        return format(obj, ".17g")
    return json.dumps(obj)


def dumps(obj: Any, indent: int = 2) -> str:
    """Serialize with sorted keys and every float printed to 17 significant digits."""
    return _emit(_to_plain(obj), indent, 0) + "\n"


def reports_to_csv(rows: Iterable[dict]) -> str:
    """Batch CSV: one row per (body, k, check)."""
    columns = ["body", "k", "name", "lhs", "rhs", "slack", "relative_slack", "equality"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        values = []
        for col in columns:
            v = row.get(col, "")
            values.append(format(v, ".17g") if isinstance(v, float) else v)
        writer.writerow(values)
    return buf.getvalue()
