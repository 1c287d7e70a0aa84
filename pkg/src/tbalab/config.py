"""Run configuration: a YAML (or JSON) document describing one instance.

Example::

    s: 1.0
    G: {family: A, rank: 2}      # or a literal matrix [[0, 1], [1, 0]]
    gauge: half-g                # zero | half-g | g | {custom: [[...]]}
    asymptotics: {kind: MassCosh, r: 1.0, w: pf}   # gamma derived from λ_PF when omitted
    grid: {L: 25, M: 4097}
    solver: {tol: 1.0e-12, max_iter: 10000, damping: 1.0}
    outputs: {csv_path: solution.csv, report_path: report.json}
    verify: {c_independence: [zero, half-g], ysystem: true, kernel_identities: true}
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional

import numpy as np
import yaml

from .errors import ConfigError, TBAError
from .model import AsymptoticsSpec, Grid, ModelSpec, make_grid
from .solver import SolverOptions, resolve_gauge
from .spectral import as_matrix, dynkin_adjacency, perron_frobenius

OUTPUT_DIR_ENV = "TBALAB_OUTPUT_DIR"

_TOP_KEYS = {"s", "G", "gauge", "asymptotics", "grid", "solver", "outputs", "verify"}


@dataclass
class VerifySpec:
    kernel_identities: bool = True
    pf_catalog: bool = True
    constant_solutions: bool = True
    ysystem: bool = False
    c_independence: List[Any] = field(default_factory=list)


@dataclass
class RunConfig:
    s: float = 1.0
    G: Optional[np.ndarray] = None
    gauge: Any = "half-g"
    asymptotics: AsymptoticsSpec = field(default_factory=AsymptoticsSpec.zero)
    grid: Optional[Grid] = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    csv_path: Optional[Path] = None
    report_path: Optional[Path] = None
    verify_path: Optional[Path] = None
    verify: VerifySpec = field(default_factory=VerifySpec)
    source: Optional[Path] = None

    @property
    def has_model(self) -> bool:
        return self.G is not None

    def model_spec(self) -> ModelSpec:
        if self.G is None:
            raise ConfigError("a coupling matrix is required for this command", field="G")
        C = resolve_gauge(self.gauge, self.G)
        try:
            return ModelSpec(self.s, self.G, C, self.asymptotics)
        except TBAError as exc:
            raise ConfigError(f"invalid model: {exc}", field="G/gauge/asymptotics") from exc


def _num(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=path)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError("must be finite", field=path)
    if positive and value <= 0:
        raise ConfigError("must be positive", field=path)
    return value


def _matrix(value, path):
    if isinstance(value, dict):
        unknown = set(value) - {"family", "rank"}
        if unknown or "family" not in value or "rank" not in value:
            raise ConfigError("catalog reference needs exactly the keys 'family' and 'rank'", field=path)
        try:
            return dynkin_adjacency(str(value["family"]), int(value["rank"]))
        except (TBAError, ValueError) as exc:
            raise ConfigError(str(exc), field=path) from exc
    try:
        return as_matrix(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a square numeric matrix ({exc})", field=path) from exc


def _gauge(value, path):
    if isinstance(value, str):
        if value.lower() not in ("zero", "half-g", "g"):
            raise ConfigError(f"unknown gauge {value!r}; use zero, half-g, g or {{custom: matrix}}", field=path)
        return value.lower()
    if isinstance(value, dict) and set(value) == {"custom"}:
        return _matrix(value["custom"], path + ".custom")
    raise ConfigError(f"unknown gauge {value!r}", field=path)


def _asymptotics(raw, G, s, path="asymptotics"):
    if raw is None:
        return AsymptoticsSpec.zero()
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("expected a mapping with a 'kind' key", field=path)
    kind = raw["kind"]
    if kind == "Zero":
        return AsymptoticsSpec.zero()
    if kind == "Sum":
        terms = raw.get("terms")
        if not isinstance(terms, list):
            raise ConfigError("Sum needs a list of terms", field=path + ".terms")
        return AsymptoticsSpec("Sum", terms=tuple(_asymptotics(t, G, s, f"{path}.terms[{i}]") for i, t in enumerate(terms)))
    if kind not in ("MassCosh", "ExpPlus", "ExpMinus"):
        raise ConfigError(f"unknown kind {kind!r}", field=path + ".kind")
    r = _num(raw.get("r", 1.0), path + ".r", positive=True)
    w = raw.get("w", "pf")
    gamma = raw.get("gamma")
    if isinstance(w, str):
        if w != "pf":
            raise ConfigError("w must be a list of positive numbers or 'pf'", field=path + ".w")
        if G is None:
            raise ConfigError("'pf' needs a coupling matrix", field=path + ".w")
        try:
            pf = perron_frobenius(G)
        except TBAError as exc:
            raise ConfigError(str(exc), field=path + ".w") from exc
        w = pf.w
        if gamma is None:
            gamma = math.acos(pf.lambda_pf / 2.0)
    else:
        w = [_num(v, f"{path}.w[{i}]", positive=True) for i, v in enumerate(w)]
    if gamma is None:
        raise ConfigError("gamma is required unless w is 'pf'", field=path + ".gamma")
    gamma = _num(gamma, path + ".gamma", positive=True)
    try:
        spec = AsymptoticsSpec(kind, r=r, gamma=gamma, w=w)
        if G is not None:
            spec.validate(G)
    except TBAError as exc:
        raise ConfigError(str(exc), field=path) from exc
    return spec


def _output_path(value, path):
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError("expected a file path", field=path)
    p = Path(value)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def parse_config(raw: dict, source: Optional[Path] = None) -> RunConfig:
    """Validate a decoded config mapping and build a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="<root>")
    cfg = RunConfig(source=source)
    cfg.s = _num(raw.get("s", 1.0), "s", positive=True)
    if "G" in raw:
        cfg.G = _matrix(raw["G"], "G")
        if np.any(cfg.G < 0):
            raise ConfigError("G must be non-negative", field="G")
        try:
            from .spectral import check_mat_lt2

            check_mat_lt2(cfg.G)
        except TBAError as exc:
            raise ConfigError(f"{type(exc).__name__}: {exc}", field="G") from exc
    cfg.gauge = _gauge(raw.get("gauge", "half-g"), "gauge")
    cfg.asymptotics = _asymptotics(raw.get("asymptotics"), cfg.G, cfg.s)

    grid = raw.get("grid") or {}
    if not isinstance(grid, dict):
        raise ConfigError("expected a mapping", field="grid")
    L = _num(grid.get("L", 25.0 * cfg.s), "grid.L", positive=True)
    M = grid.get("M", 4097)
    if isinstance(M, bool) or not isinstance(M, int):
        raise ConfigError("M must be an odd integer >= 3", field="grid.M")
    try:
        cfg.grid = make_grid(L, M)
    except TBAError as exc:
        raise ConfigError(str(exc), field="grid") from exc

    solver = raw.get("solver") or {}
    if not isinstance(solver, dict):
        raise ConfigError("expected a mapping", field="solver")
    unknown = set(solver) - {"tol", "max_iter", "damping", "record_history", "rescaled"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="solver")
    try:
        cfg.solver = SolverOptions(
            tol=_num(solver.get("tol", 1e-12), "solver.tol", positive=True),
            max_iter=int(_num(solver.get("max_iter", 10_000), "solver.max_iter", positive=True)),
            damping=_num(solver.get("damping", 1.0), "solver.damping", positive=True),
            record_history=bool(solver.get("record_history", False)),
            rescaled=bool(solver.get("rescaled", False)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), field="solver") from exc

    outputs = raw.get("outputs") or {}
    if not isinstance(outputs, dict):
        raise ConfigError("expected a mapping", field="outputs")
    cfg.csv_path = _output_path(outputs.get("csv_path"), "outputs.csv_path")
    cfg.report_path = _output_path(outputs.get("report_path"), "outputs.report_path")
    cfg.verify_path = _output_path(outputs.get("verify_path"), "outputs.verify_path")

    verify = raw.get("verify") or {}
    if not isinstance(verify, dict):
        raise ConfigError("expected a mapping", field="verify")
    unknown = set(verify) - {"kernel_identities", "pf_catalog", "constant_solutions", "ysystem", "c_independence"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="verify")
    gauges = verify.get("c_independence") or []
    if not isinstance(gauges, list):
        raise ConfigError("expected a list of gauges", field="verify.c_independence")
    cfg.verify = VerifySpec(
        kernel_identities=bool(verify.get("kernel_identities", True)),
        pf_catalog=bool(verify.get("pf_catalog", True)),
        constant_solutions=bool(verify.get("constant_solutions", True)),
        ysystem=bool(verify.get("ysystem", False)),
        c_independence=[_gauge(g, f"verify.c_independence[{i}]") for i, g in enumerate(gauges)],
    )
    if cfg.G is not None:
        cfg.model_spec()  # fail early on inconsistent instances
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field=str(path)) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"malformed YAML/JSON: {exc}", field=where) from exc
    return parse_config(raw, source=path)
