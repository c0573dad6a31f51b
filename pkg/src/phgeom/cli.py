"""Command-line driver: JSON configs in, canonical JSON reports out."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import catalog as C
from . import expr as E
from .calculus import FormError
from .geometry import GeometryError, curvature_tensors, lowered_riemann
from .report import Check, Report, dumps, residual_check, write_report
from .structures import (
    StructureError, classify, integrability_report, verify_phe,
)

COMMANDS = ("verify", "classify", "curvature", "invariance", "ansatz-scan", "list-families")
DEFAULT_SAMPLES = 200
DEFAULT_SEED = 42
DEFAULT_TOL = 1e-9
SEED_LIMIT = 1 << 64

MODULE_ERRORS = (C.CatalogError, StructureError, GeometryError, FormError, E.ExprError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class RunConfig:
    family: str
    params: dict = field(default_factory=dict)
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    tol: float = DEFAULT_TOL
    checks: tuple[str, ...] | None = None
    instance: C.ModelInstance | None = field(default=None, repr=False, compare=False)

    def build(self) -> C.ModelInstance:
        if self.instance is None:
            self.instance = C.build(self.family, **self.params)
        return self.instance


def _int_field(data: dict, key: str, default: int) -> int:
    v = data.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    return v


def validate_config(data) -> RunConfig:
    """Check a decoded config object and build its model instance eagerly."""
    if not isinstance(data, dict):
        raise ConfigError("", "config must be a JSON object")
    unknown = set(data) - {"family", "params", "samples", "seed", "tol", "checks"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    family = data.get("family")
    if family not in C.FAMILIES:
        raise ConfigError("family", f"unknown family {family!r}; valid families: {', '.join(C.FAMILIES)}")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "expected an object")
    samples = _int_field(data, "samples", DEFAULT_SAMPLES)
    if samples < 1:
        raise ConfigError("samples", f"must be >= 1, got {samples}")
    seed = _int_field(data, "seed", DEFAULT_SEED)
    if not 0 <= seed < SEED_LIMIT:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    tol = data.get("tol", DEFAULT_TOL)
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not (math.isfinite(tol) and tol > 0):
        raise ConfigError("tol", f"must be a positive number, got {tol!r}")
    checks = data.get("checks")
    if checks is not None:
        if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
            raise ConfigError("checks", "expected a list of check-name prefixes")
        checks = tuple(checks)
    cfg = RunConfig(family, params, samples, seed, float(tol), checks)
    try:
        cfg.build()
    except E.ParseError as exc:
        msg = str(exc) if f"offset {exc.offset}" in str(exc) else f"{exc} (offset {exc.offset})"
        raise ConfigError("params", msg) from exc
    except TypeError as exc:
        raise ConfigError("params", str(exc)) from exc
    except (C.CatalogError, E.ExprError, ValueError) as exc:
        raise ConfigError("params", str(exc)) from exc
    return cfg


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read and validate a config file; ``overrides`` replace top-level fields."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if overrides and isinstance(data, dict):
        data = {**data, **overrides}
    return validate_config(data)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _classification(m: C.ModelInstance, points, tol: float) -> str | None:
    """None for instances that carry neither forms nor a triple (frames, bare metrics)."""
    obj = m.forms if m.forms is not None else m.triple
    if obj is None:
        return None
    return classify(obj, points, tol).value


def _verify(m: C.ModelInstance, points, tol: float, report: Report) -> None:
    if m.forms is not None:
        report.add(*verify_phe(m.forms, points, tol))
        report.add(*integrability_report(m.structure, points, max(tol, 1e-8)))
        report.add(C.ddc_theta_check(m, points, tol))
    if m.triple is not None:
        algebra = m.triple.algebra_residuals(points)
        report.add(*(residual_check(f"algebra: {k}", v, points, tol) for k, v in algebra.items()))
        report.add(*(residual_check(f"integrability: {k} = 0", v, points, tol)
                     for k, v in m.triple.nijenhuis_residuals(points).items()))
    if m.name == "inoue_splus":
        report.add(*C.inoue_structure_checks(m, points, tol))
    if m.name == "inoue_s0":
        report.add(*C.s0_checks(m, points, tol))
    if m.name == "walker":
        report.add(*C.walker_checks(m, points, tol))
    if m.generators:
        checks, notes = C.invariance_check(m, points, tol)
        report.add(*checks)
        report.notes.extend(notes)


def _curvature(m: C.ModelInstance, points, tol: float, report: Report) -> None:
    if m.name == "walker":
        report.add(*C.walker_checks(m, points, tol))
        return
    if m.metric is None and m.forms is None:
        raise C.CatalogError(f"{m.name} carries no metric")
    g = m.metric if m.metric is not None else m.structure.g
    R = lowered_riemann(g, points)
    scale = np.maximum(1.0, np.max(np.abs(R).reshape(len(R), -1), axis=1))
    pair = np.max(np.abs(R - R.transpose(0, 3, 4, 1, 2)).reshape(len(R), -1), axis=1)
    bianchi = R + R.transpose(0, 1, 3, 4, 2) + R.transpose(0, 1, 4, 2, 3)
    report.add(residual_check("curvature: R_abcd = R_cdab", pair / scale, points, tol))
    report.add(residual_check("curvature: R_a[bcd] = 0", np.max(np.abs(bianchi).reshape(len(R), -1), axis=1) / scale,
                              points, tol))
    _, ricci = curvature_tensors(g, points)
    report.notes.append(f"max |Ricci| = {float(np.max(np.abs(ricci))):.12e}")


def _ansatz(m: C.ModelInstance, points, tol: float, report: Report) -> None:
    if m.name != "inoue_s0":
        raise C.CatalogError("ansatz-scan applies to the inoue_s0 family only")
    checks, info = C.s0_ansatz_scan(m, points, tol=tol)
    report.add(*checks)
    report.notes.append(f"b = {info['b']:.12e}; |exp(2ib) - 1| = {info['closed_form_defect']:.12e}")


def execute(cfg: RunConfig, command: str) -> Report:
    """Run one command; module errors become failing checks in the report."""
    if command not in COMMANDS or command == "list-families":
        raise ConfigError("command", f"unknown command {command!r}")
    report = Report(cfg.family, params=dict(cfg.params))
    try:
        m = cfg.build()
        report.params = m.params if m.params else dict(cfg.params)
        report.notes.extend(m.notes)
        points = m.sample(cfg.samples, cfg.seed)
        if command == "verify":
            _verify(m, points, cfg.tol, report)
            report.classification = _classification(m, points, cfg.tol)
        elif command == "classify":
            if m.forms is not None:
                report.add(*verify_phe(m.forms, points, cfg.tol))
            report.classification = _classification(m, points, cfg.tol)
        elif command == "curvature":
            _curvature(m, points, cfg.tol, report)
        elif command == "invariance":
            checks, notes = C.invariance_check(m, points, cfg.tol)
            report.add(*checks)
            report.notes.extend(notes)
        elif command == "ansatz-scan":
            _ansatz(m, points, cfg.tol, report)
    except MODULE_ERRORS as exc:
        report.add(Check(f"error: {type(exc).__name__}", math.inf, cfg.tol, None, str(exc)))
    if cfg.checks is not None:
        report.checks = [c for c in report.checks if any(c.name.startswith(p) for p in cfg.checks)]
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phgeom", description="Verify para-hyperhermitian structures on four-manifolds.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="write the report here instead of stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-families":
        print("\n".join(C.FAMILIES))
        return 0
    if not args.config:
        print("phgeom: --config is required for this command", file=sys.stderr)
        return 2
    try:
        overrides = {k: getattr(args, k) for k in ("samples", "seed", "tol") if getattr(args, k) is not None}
        cfg = load_config(args.config, overrides)
        report = execute(cfg, args.command)
    except (ConfigError, OSError) as exc:
        print(f"phgeom: {exc}", file=sys.stderr)
        return 2
    if args.out:
        write_report(report, args.out)
    else:
        sys.stdout.write(dumps(report.to_json()))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
