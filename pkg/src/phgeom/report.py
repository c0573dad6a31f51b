"""Check records, verification reports and their canonical JSON encoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Check:
    """One residual check. It passes when ``max_residual < tolerance``."""

    name: str
    max_residual: float
    tolerance: float
    worst_point: list[float] | None = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.max_residual) and self.max_residual < self.tolerance)

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "max_residual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
            "worst_point": None if self.worst_point is None else [float(x) for x in self.worst_point],
        }
        if self.note:
            out["note"] = self.note
        return out


def residual_check(name: str, per_point: np.ndarray, points, tol: float, note: str = "") -> Check:
    """Build a check from per-point residuals; the worst point is the argmax."""
    per_point = np.asarray(per_point, dtype=float).reshape(-1)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if per_point.size == 0:
        return Check(name, 0.0, tol, None, note)
    if not np.all(np.isfinite(per_point)):
        k = int(np.argmax(~np.isfinite(per_point)))
        return Check(name, math.inf, tol, pts[k].tolist(), note)
    k = int(np.argmax(per_point))
    return Check(name, float(per_point[k]), tol, pts[k].tolist(), note)


def lower_bound_check(name: str, value: float, bound: float, tol: float,
                      worst_point=None, note: str = "") -> Check:
    """Check that ``value > bound``; the residual is the shortfall max(0, bound - value)."""
    shortfall = max(0.0, bound - value) if math.isfinite(value) else math.inf
    extra = f"value={value:.12e} bound={bound:.12e}"
    return Check(name, shortfall, tol, worst_point, f"{note}; {extra}" if note else extra)


@dataclass
class Report:
    family: str
    params: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    classification: str | None = None
    notes: list[str] = field(default_factory=list)

    def add(self, *checks: Check) -> None:
        self.checks.extend(checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "params": self.params,
            "classification": self.classification,
            "checks": [c.to_json() for c in self.checks],
            "notes": list(self.notes),
        }


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return "%.12e" % x
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(v, indent, level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, complex):
        return _encode([obj.real, obj.imag], indent, level)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Canonical JSON: sorted keys, every float written with %.12e."""
    return _encode(obj, indent, 0) + "\n"


def write_report(report: Report, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(report.to_json()))
