"""Command-line front end.

Subcommands::

    tbalab solve <config>
    tbalab verify <config>
    tbalab kappa-scan --g 1 --min 0 --max 1 --n 101 --out scan.csv
    tbalab catalog <family> <rank>

Exit codes: 0 success, 2 config error, 3 non-convergence, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate

from . import kernel as kern
from .analytic import ysystem_residual
from .config import RunConfig, load_config
from .errors import ConfigError, NoConvergence, RangeError, SolveError, TBAError
from .solver import kappa_pf, solve_constant, solve_tba, verify_c_independence
from .spectral import dynkin_adjacency, perron_frobenius

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOCONV = 3
EXIT_VERIFY = 4

YSYSTEM_TOL = 1e-5
C_INDEPENDENCE_TOL = 1e-7

# catalog swept by the PF check
CATALOG = (
    [("A", n) for n in range(1, 9)]
    + [("D", n) for n in (4, 5, 6)]
    + [("E", n) for n in (6, 7, 8)]
    + [("T", n) for n in range(1, 5)]
    + [("B", 3), ("C", 3), ("F", 4), ("G", 2)]
)


# --------------------------------------------------------------------------
# file output


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v: float) -> str:
    return "%.17g" % v


def format_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# solve


@dataclass
class RunArtifacts:
    csv_path: Optional[Path]
    report_path: Optional[Path]
    report: dict
    solution: Optional[np.ndarray] = None
    scan_path: Optional[Path] = None


def solution_table(spec, grid, f: np.ndarray) -> np.ndarray:
    """Columns ``x, f_1..f_N, Y_1..Y_N`` with ``Y = exp(a + f)`` on the real axis."""
    a = np.real(spec.a(grid.nodes))
    with np.errstate(over="ignore"):
        Y = np.exp(a + f)
    return np.column_stack([grid.nodes, f, Y])


def _header(n: int):
    return ["x"] + [f"f_{i}" for i in range(1, n + 1)] + [f"Y_{i}" for i in range(1, n + 1)]


def ysystem_measure(spec, grid, f) -> Dict[str, float]:
    """Y-system residual with both boundary constructions; ``measured`` is the worse one."""
    pv = ysystem_residual(spec, grid, f, method="pv")
    ext = ysystem_residual(spec, grid, f, method="extrapolate")
    return {"pv": pv, "extrapolate": ext, "measured": max(pv, ext)}


def run_solve_config(cfg: RunConfig) -> RunArtifacts:
    spec = cfg.model_spec()
    try:
        sol, report = solve_tba(spec, cfg.grid, cfg.solver)
    except NoConvergence as exc:
        raise SolveError(str(exc), exc.report) from exc
    except TBAError as exc:
        raise ConfigError(str(exc), field="grid") from exc
    f = sol.values
    out = report.to_dict()
    pf = perron_frobenius(spec.G)
    out["lambda_pf"] = pf.lambda_pf
    out["n"] = spec.n
    out["grid"] = {"L": cfg.grid.L, "M": cfg.grid.M, "h": cfg.grid.h}
    if cfg.verify.ysystem:
        ys = ysystem_measure(spec, cfg.grid, f)
        out["ysystem_residual"] = ys["measured"]
        out["ysystem_residual_pv"] = ys["pv"]
        out["ysystem_residual_extrapolate"] = ys["extrapolate"]
    if cfg.verify.c_independence:
        sweep = verify_c_independence(spec, cfg.grid, cfg.verify.c_independence, cfg.solver)
        out["c_independence_deviation"] = sweep.max_deviation
        out["c_independence_converged"] = [r.converged for r in sweep.reports]
    table = solution_table(spec, cfg.grid, f)
    if cfg.csv_path is not None:
        atomic_write_text(cfg.csv_path, format_csv(_header(spec.n), table))
    out = _json_safe(out)
    if cfg.report_path is not None:
        atomic_write_text(cfg.report_path, dump_json(out))
    return RunArtifacts(cfg.csv_path, cfg.report_path, out, solution=f)


def run_solve(config_path) -> RunArtifacts:
    """Solve the instance described by ``config_path`` and write its CSV and JSON artifacts."""
    return run_solve_config(load_config(config_path))


# --------------------------------------------------------------------------
# kappa scan


def kappa_single(g: float, c) -> np.ndarray:
    """``κ(c) = max(|c|, |g - c|) / (2 - c)`` for one TBA equation."""
    c = np.asarray(c, dtype=float)
    return np.maximum(np.abs(c), np.abs(g - c)) / (2.0 - c)


def kappa_scan(g: float, c_min: float, c_max: float, n_points: int, out=None):
    """Tabulate ``κ(c)`` on an equispaced grid of ``c``; optionally write ``c,kappa`` CSV."""
    if not (-2.0 < c_min < 2.0 and -2.0 < c_max < 2.0):
        raise RangeError(f"c range [{c_min:g}, {c_max:g}] must lie inside (-2, 2)")
    if c_max < c_min:
        raise RangeError("c_max must not be smaller than c_min")
    n_points = int(n_points)
    if n_points < 1:
        raise RangeError("need at least one point")
    c = np.linspace(c_min, c_max, n_points)
    k = kappa_single(g, c)
    if out is not None:
        atomic_write_text(out, format_csv(["c", "kappa"], np.column_stack([c, k])))
    return c, k


# --------------------------------------------------------------------------
# verification suites


def _check(measured, tol, ok=None) -> dict:
    measured = float(measured)
    passed = bool(measured < tol) if ok is None else bool(ok)
    return {"pass": passed, "measured": measured, "tolerance": tol}


def check_kernel_oracle() -> dict:
    worst = 0.0
    x = np.linspace(-8.0, 8.0, 161)
    for d in (-1.9, 0.5, 1.9):
        for s in (0.5, 1.0):
            exact = kern.phi(d, s, x).real
            worst = max(worst, float(np.max(np.abs(exact - kern.phi_d_fourier_oracle(d, s, x)))))
    return _check(worst, 1e-9)


def check_functional_relation() -> dict:
    rng = np.random.default_rng(1234)
    worst = 0.0
    for d in (-1.5, 0.0, 1.0, 1.9):
        p = kern.ScalarKernelParams.from_d(d, 1.0)
        z = rng.uniform(-6, 6, 250) + 1j * rng.uniform(-0.45, 0.45, 250)
        z = z[np.abs(z.real) > 1e-3]
        r = kern.phi_d(p, z + 1j) + kern.phi_d(p, z - 1j) - d * kern.phi_d(p, z)
        worst = max(worst, float(np.max(np.abs(r))))
    return _check(worst, 1e-11)


def check_residues() -> dict:
    worst = 0.0
    for d in (-1.0, 0.5, 1.2):
        p = kern.ScalarKernelParams.from_d(d, 1.0)
        for n in (1, 2, 3):
            target = math.sin(n * p.gamma) / math.sin(p.gamma)
            worst = max(worst, abs(kern.residue_contour(p, n) - target))
    return _check(worst, 1e-8)


def check_cosh_transforms() -> dict:
    worst = 0.0
    for m in range(1, 7):
        # even integrand; the tail past x = 60 is below 1e-25
        val, _ = integrate.quad(lambda x: math.cosh(x) ** -m, 0.0, 60.0, epsabs=1e-15, epsrel=1e-13, limit=200)
        val *= 2.0
        worst = max(worst, abs(kern.cosh_power_fourier(m, 0.0) - val))
    return _check(worst, 1e-10)


def check_pf_catalog() -> dict:
    worst = 0.0
    for fam, rank in CATALOG:
        G = dynkin_adjacency(fam, rank)
        lam = perron_frobenius(G).lambda_pf
        kappa_pf(G)  # raises on disagreement beyond 1e-10
        worst = max(worst, lam / 2.0)
    return {"pass": bool(worst < 1.0), "measured": worst, "tolerance": 1.0}


def a_series_constant(N: int) -> np.ndarray:
    """``Y_n = sin(nθ) sin((n+2)θ) / sin(θ)^2`` with ``θ = π/(N+3)``."""
    th = math.pi / (N + 3)
    n = np.arange(1, N + 1)
    return np.sin(n * th) * np.sin((n + 2) * th) / math.sin(th) ** 2


def check_constant_solutions() -> dict:
    worst = 0.0
    for N in range(1, 9):
        worst = max(worst, float(np.max(np.abs(solve_constant(dynkin_adjacency("A", N)) - a_series_constant(N)))))
    return _check(worst, 1e-10)


def constant_ysystem_defect(G, Y) -> float:
    """``max |2 log Y_n - Σ_m G_nm log(1 + Y_m)|``."""
    return float(np.max(np.abs(2.0 * np.log(Y) - G @ np.log1p(Y))))


def verify_config(cfg: RunConfig) -> dict:
    """Run every requested check; returns ``{name: {pass, measured, tolerance}}``."""
    checks: Dict[str, Callable[[], dict]] = {}
    if cfg.verify.kernel_identities:
        checks["kernel_fourier_oracle"] = check_kernel_oracle
        checks["kernel_functional_relation"] = check_functional_relation
        checks["kernel_residues"] = check_residues
        checks["cosh_power_transforms"] = check_cosh_transforms
    if cfg.verify.pf_catalog:
        checks["pf_catalog"] = check_pf_catalog
    if cfg.verify.constant_solutions:
        checks["constant_solutions"] = check_constant_solutions

    results = {}
    for name, fn in checks.items():
        t0 = time.perf_counter()
        try:
            results[name] = fn()
        except TBAError as exc:
            results[name] = {"pass": False, "measured": None, "tolerance": None, "error": str(exc)}
        LOGGER.info("%s: %.2fs", name, time.perf_counter() - t0)

    if cfg.has_model:
        spec = cfg.model_spec()
        Y = solve_constant(spec.G)
        results["model_constant_ysystem"] = _check(constant_ysystem_defect(spec.G, Y), 1e-10)
        if cfg.verify.ysystem:
            try:
                sol, _ = solve_tba(spec, cfg.grid, cfg.solver)
                results["ysystem"] = _check(ysystem_measure(spec, cfg.grid, sol.values)["measured"], YSYSTEM_TOL)
            except TBAError as exc:
                results["ysystem"] = {"pass": False, "measured": None, "tolerance": YSYSTEM_TOL, "error": str(exc)}
        if cfg.verify.c_independence:
            try:
                sweep = verify_c_independence(spec, cfg.grid, cfg.verify.c_independence, cfg.solver)
                n_ok = sum(r.converged for r in sweep.reports)
                results["c_independence"] = _check(
                    sweep.max_deviation, C_INDEPENDENCE_TOL,
                    ok=n_ok >= 2 and sweep.max_deviation < C_INDEPENDENCE_TOL)
            except TBAError as exc:
                results["c_independence"] = {"pass": False, "measured": None,
                                             "tolerance": C_INDEPENDENCE_TOL, "error": str(exc)}
    elif cfg.verify.ysystem or cfg.verify.c_independence:
        raise ConfigError("model checks requested but no coupling matrix given", field="G")
    return _json_safe(results)


def verify_all(config_path) -> dict:
    cfg = load_config(config_path)
    results = verify_config(cfg)
    if cfg.verify_path is not None:
        atomic_write_text(cfg.verify_path, dump_json(results))
    return results


# --------------------------------------------------------------------------
# argparse


def _cmd_solve(args) -> int:
    art = run_solve(args.config)
    print(dump_json(art.report), end="")
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = verify_all(args.config)
    print(dump_json(results), end="")
    return EXIT_OK if all(r["pass"] for r in results.values()) else EXIT_VERIFY


def _cmd_scan(args) -> int:
    c, k = kappa_scan(args.g, args.min, args.max, args.n, args.out)
    if args.out is None:
        sys.stdout.write(format_csv(["c", "kappa"], np.column_stack([c, k])))
    return EXIT_OK


def _cmd_catalog(args) -> int:
    try:
        G = dynkin_adjacency(args.family, args.rank)
    except (TBAError, ValueError) as exc:
        raise ConfigError(str(exc), field="catalog") from exc
    pf = perron_frobenius(G)
    for row in G:
        print(" ".join(f"{v:g}" for v in row))
    print(f"lambda_pf = {pf.lambda_pf:.17g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tbalab", description="Numerical TBA solver and checks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one configured instance")
    p.add_argument("config")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="run the verification suites")
    p.add_argument("config")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("kappa-scan", help="tabulate the single-equation contraction constant")
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--min", type=float, default=-1.0)
    p.add_argument("--max", type=float, default=1.5)
    p.add_argument("--n", type=int, default=251)
    p.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("catalog", help="print a Dynkin adjacency matrix and its PF eigenvalue")
    p.add_argument("family")
    p.add_argument("rank", type=int)
    p.set_defaults(func=_cmd_catalog)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, RangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(dump_json(exc.report.to_dict()), file=sys.stderr, end="")
        return EXIT_NOCONV


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
