"""Fixed-point solution of the TBA equations and contraction estimates."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate

from . import kernel as kern
from .errors import GridTooCoarse, NoConvergence
from .model import ConvolutionOperator, Grid, ModelSpec, SampledFunction, apply_LC
from .spectral import as_matrix, check_mat_lt2, perron_frobenius

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-12
    max_iter: int = 10_000
    damping: float = 1.0
    record_history: bool = False
    rescaled: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    kappa_estimate: float
    kappa_observed: float
    converged: bool
    history: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "kappa_estimate": self.kappa_estimate,
            "kappa_observed": self.kappa_observed,
            "converged": self.converged,
        }
        if self.history:
            out["history"] = list(self.history)
        return out


# --------------------------------------------------------------------------
# contraction constants


def _abs_kernel_integral(K: kern.KernelDecomp, i: int, j: int) -> float:
    def integrand(x):
        return abs(kern.phi_matrix(K, np.array([x]))[0, i, j])

    val, _ = integrate.quad(integrand, 0.0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-12)
    return 2.0 * val


def contraction_estimate(G, C, w, p: float = math.inf, s: float = 1.0) -> float:
    """A-priori Lipschitz bound ``κ = ||ρ·σ||_p`` of the TBA map in the ``w``-weighted norm.

    ``M_ij = max(|C_ij|, |G_ij - C_ij|)``, ``σ_i = ||(M_ij w_j)_j||_q`` with
    ``1/p + 1/q = 1`` and ``ρ_ij = (1/w_i) ∫ |Φ_C,ij|``.  For non-negative
    ``C`` the kernel is non-negative and ``∫|Φ_C| = (2 - C)^{-1}``; otherwise
    the absolute integrals are computed by quadrature.  ``κ`` does not depend
    on ``s``.
    """
    G = as_matrix(G)
    C = as_matrix(C)
    w = np.asarray(w, dtype=float).ravel()
    if w.shape != (G.shape[0],) or np.any(w <= 0):
        raise ValueError("w must be a positive vector matching G")
    if not p >= 1:
        raise ValueError("p must lie in [1, inf]")
    K = kern.build_kernel(C, s)
    if np.all(C >= 0):
        absint = kern.kernel_total_integral(K).real
    else:
        n = G.shape[0]
        absint = np.array([[_abs_kernel_integral(K, i, j) for j in range(n)] for i in range(n)])
    rho = absint / w[:, None]
    Mw = np.maximum(np.abs(C), np.abs(G - C)) * w[None, :]
    if p == 1:
        sigma = Mw.max(axis=1)
    elif math.isinf(p):
        sigma = Mw.sum(axis=1)
    else:
        q = p / (p - 1.0)
        sigma = np.sum(Mw**q, axis=1) ** (1.0 / q)
    return float(np.linalg.norm(rho @ sigma, ord=p))


def kappa_from_lambda(lambda_pf: float) -> float:
    """``λ/(4 - λ)``: the sharp bound for gauge ``C = G/2`` with Perron-Frobenius weights."""
    return abs(lambda_pf / (4.0 - lambda_pf))


def kappa_pf(G) -> float:
    """Contraction constant for gauge ``G/2``, cross-checked against :func:`contraction_estimate`."""
    G = as_matrix(G)
    pf = perron_frobenius(G)
    kappa = kappa_from_lambda(pf.lambda_pf)
    general = contraction_estimate(G, G / 2.0, pf.w, math.inf)
    if abs(kappa - general) > 1e-10:
        raise ArithmeticError(f"closed-form kappa {kappa!r} disagrees with general estimate {general!r}")
    return kappa


# --------------------------------------------------------------------------
# constant Y-system


def solve_constant(G, tol: float = 1e-15, max_iter: int = 100_000) -> np.ndarray:
    """Unique positive solution of ``Y_n^2 = Π_m (1 + Y_m)^{G_nm}``.

    Iterates the constant specialisation of the TBA map in gauge ``G/2``,
    ``f <- (2 - G/2)^{-1} (G log(1 + e^f) - (G/2) f)``, from ``f = 0``.
    """
    G = as_matrix(G)
    perron_frobenius(G)  # admissibility: non-negative, irreducible
    check_mat_lt2(G)
    C = G / 2.0
    A = np.linalg.inv(2.0 * np.eye(len(G)) - C)
    f = np.zeros(len(G))
    for _ in range(max_iter):
        f_new = A @ (G @ np.logaddexp(0.0, f) - C @ f)
        step = np.max(np.abs(f_new - f))
        f = f_new
        if step <= tol * max(1.0, np.max(np.abs(f))):
            break
    else:
        raise NoConvergence(f"constant Y-system iteration did not converge in {max_iter} steps")
    return np.exp(f)


# --------------------------------------------------------------------------
# TBA iteration


class TBAMap:
    """One sweep ``f -> Φ_C ⋆ L_C[f]`` of the TBA fixed-point map on a grid."""

    def __init__(self, spec: ModelSpec, grid: Grid, **conv_kwargs):
        self.spec = spec
        self.grid = grid
        self.a = np.real(spec.a(grid.nodes))
        self.op = ConvolutionOperator(spec.kernel, grid, 0.0, **conv_kwargs)

    def source(self, f: np.ndarray) -> np.ndarray:
        return apply_LC(self.spec.G, self.spec.C, self.a, f)

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return np.real(self.op(self.source(f)))

    def residual(self, f: np.ndarray) -> float:
        return float(np.max(np.abs(self(f) - f)))


def check_grid(spec: ModelSpec, grid: Grid) -> None:
    if not grid.h < spec.s / 4.0:
        raise GridTooCoarse(f"grid spacing {grid.h:.4g} must be below s/4 = {spec.s / 4:.4g}")


def solve_tba(spec: ModelSpec, grid: Grid, opts: Optional[SolverOptions] = None, check: bool = True):
    """Solve the TBA equation on ``grid`` by (optionally damped) Banach iteration from ``f = 0``.

    Returns
    -------
    f_star : SampledFunction
    report : SolveReport

    Raises
    ------
    GridTooCoarse
        If ``h >= s/4``.
    NoConvergence
        If ``max_iter`` is exhausted and ``check`` is true; the exception
        carries the report and the last iterate (``exc.result``).
    """
    opts = opts or SolverOptions()
    check_grid(spec, grid)
    T = TBAMap(spec, grid)
    pf = perron_frobenius(spec.G)
    kappa_est = contraction_estimate(spec.G, spec.C, pf.w, math.inf, spec.s)
    w = pf.w

    f = np.zeros((grid.M, spec.n))
    theta = opts.damping
    history = []
    prev = None
    kappa_obs = 0.0
    converged = False
    it = 0
    step = math.inf
    for it in range(1, int(opts.max_iter) + 1):
        if opts.rescaled:
            u = f / w
            u_new = (1.0 - theta) * u + theta * (T(f) / w)
            f_new = u_new * w
        else:
            f_new = (1.0 - theta) * f + theta * T(f)
        step = float(np.max(np.abs(f_new - f)))
        if prev is not None and prev > 1e3 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(f_new)))):
            kappa_obs = max(kappa_obs, step / prev)
        prev = step
        f = f_new
        if opts.record_history:
            history.append(step)
        if step < opts.tol:
            converged = True
            break
    report = SolveReport(
        iterations=it,
        final_residual=step,
        kappa_estimate=kappa_est,
        kappa_observed=kappa_obs,
        converged=converged,
        history=history,
    )
    result = SampledFunction(grid, f)
    LOGGER.debug("solve_tba: %s", report)
    if not converged and check:
        exc = NoConvergence(f"TBA iteration did not reach tol={opts.tol:g} in {opts.max_iter} steps", report)
        exc.result = result
        raise exc
    return result, report


# --------------------------------------------------------------------------
# gauge independence


def resolve_gauge(gauge, G) -> np.ndarray:
    """Turn ``"zero"``, ``"half-g"``, ``"g"`` or a matrix into a gauge matrix."""
    G = as_matrix(G)
    if isinstance(gauge, str):
        key = gauge.lower()
        if key == "zero":
            return np.zeros_like(G)
        if key in ("half-g", "half_g", "g/2"):
            return G / 2.0
        if key == "g":
            return G.copy()
        raise ValueError(f"unknown gauge name {gauge!r}")
    C = as_matrix(gauge)
    if C.shape != G.shape:
        raise ValueError(f"gauge has shape {C.shape}, expected {G.shape}")
    return C


@dataclass
class GaugeSweep:
    max_deviation: float
    gauges: list
    reports: list
    solutions: list

    def to_dict(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "gauges": [np.asarray(C).tolist() for C in self.gauges],
            "reports": [r.to_dict() for r in self.reports],
        }


def verify_c_independence(spec_base: ModelSpec, grid: Grid, gauges: Sequence, opts: Optional[SolverOptions] = None,
                          max_workers: Optional[int] = None) -> GaugeSweep:
    """Solve once per gauge (concurrently) and compare the solutions pairwise.

    Gauges that fail to converge are kept in the report but left out of the
    comparison.  With fewer than two converged gauges the deviation is 0.
    """
    opts = opts or SolverOptions()
    Cs = [resolve_gauge(g, spec_base.G) for g in gauges]
    specs = [spec_base.with_gauge(C) for C in Cs]

    def run(spec):
        return solve_tba(spec, grid, opts, check=False)

    if len(specs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers or len(specs)) as pool:
            results = list(pool.map(run, specs))
    else:
        results = [run(sp) for sp in specs]
    sols = [r[0] for r in results]
    reports = [r[1] for r in results]
    ok = [sol.values for sol, rep in results if rep.converged]
    dev = 0.0
    for i in range(len(ok)):
        for j in range(i + 1, len(ok)):
            dev = max(dev, float(np.max(np.abs(ok[i] - ok[j]))))
    return GaugeSweep(max_deviation=dev, gauges=Cs, reports=reports, solutions=sols)
