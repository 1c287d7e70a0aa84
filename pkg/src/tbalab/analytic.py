"""Continuation of TBA solutions into the strip and Y-system checks.

A converged solution ``f`` satisfies ``f = Φ_C ⋆ g`` with ``g = L_C[f]``, and
the same convolution with a complex-shifted kernel gives ``f(x + iy)`` for
``|y| < s``.  At ``y = ±s`` the kernel has a simple pole on the integration
path; the boundary value is the principal-value sum plus ``g(x)/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NearPole, NotConverged
from .model import ConvolutionOperator, Grid, ModelSpec, STRIP_GUARD, SampledFunction, apply_LC, log_term
from .solver import TBAMap, resolve_gauge

DEFAULT_EPS = (0.3, 0.25, 0.2, 0.15, 0.1, 0.05)


@dataclass
class StripSample:
    x_nodes: np.ndarray
    y_shift: float
    values: np.ndarray  # (M, N) complex

    def conj_mismatch(self, other: "StripSample") -> float:
        """``max |f(x - iy) - conj f(x + iy)|`` against the sample at ``-y``."""
        return float(np.max(np.abs(other.values - np.conj(self.values))))


@dataclass
class YFunctions:
    x_nodes: np.ndarray
    y_shift: float
    values: np.ndarray

    @property
    def min_modulus(self) -> float:
        return float(np.min(np.abs(self.values)))


def _values(f_star) -> np.ndarray:
    v = f_star.values if isinstance(f_star, SampledFunction) else np.asarray(f_star)
    return np.real(v if v.ndim == 2 else v[:, None])


def _source(spec: ModelSpec, grid: Grid, f: np.ndarray) -> np.ndarray:
    a = np.real(spec.a(grid.nodes))
    return apply_LC(spec.G, spec.C, a, f)


def strip_convolve(K, grid: Grid, g, y: float, guard: float = STRIP_GUARD) -> np.ndarray:
    """``(Φ_C(· + iy) ⋆ g)`` on the grid for ``|y| <= s - guard*s``."""
    if abs(y) > K.s * (1.0 - guard):
        raise NearPole(f"|y|={abs(y):g} exceeds s - guard = {K.s * (1 - guard):g}")
    return ConvolutionOperator(K, grid, y, guard=guard)(np.asarray(g))


def boundary_convolve(K, grid: Grid, g, sign: int) -> np.ndarray:
    """Limit of :func:`strip_convolve` as ``y -> sign * s`` from inside the strip."""
    return ConvolutionOperator(K, grid, boundary=int(sign))(np.asarray(g))


def evaluate_strip(spec: ModelSpec, grid: Grid, f_star, y: float, guard: float = STRIP_GUARD) -> StripSample:
    f = _values(f_star)
    vals = strip_convolve(spec.kernel, grid, _source(spec, grid, f), y, guard)
    return StripSample(grid.nodes, float(y), vals)


def boundary_value(spec: ModelSpec, grid: Grid, f_star, sign: int, tol: float = 1e-12,
                   check: bool = True) -> StripSample:
    """``f(x ± is)`` from principal-value convolution plus the half-residue jump.

    Raises
    ------
    NotConverged
        When ``check`` is set and ``f_star`` misses the fixed-point equation by
        more than ``100 * tol``.
    """
    f = _values(f_star)
    if check:
        resid = TBAMap(spec, grid).residual(f)
        if resid > 100.0 * tol:
            raise NotConverged(f"fixed-point residual {resid:.3g} exceeds 100*tol = {100 * tol:.3g}")
    vals = boundary_convolve(spec.kernel, grid, _source(spec, grid, f), sign)
    return StripSample(grid.nodes, sign * spec.s, vals)


def extrapolate_to_zero(eps: Sequence[float], samples: Sequence[np.ndarray]) -> np.ndarray:
    """Value at ``ε = 0`` of the interpolating polynomial through ``(ε_k, samples_k)``."""
    eps = np.asarray(eps, dtype=float)
    stack = np.asarray(samples)
    if len(eps) == 1:
        return stack[0]
    # Lagrange weights at zero
    w = np.array([np.prod([-e_m / (e_k - e_m) for m, e_m in enumerate(eps) if m != k])
                  for k, e_k in enumerate(eps)])
    return np.tensordot(w, stack, axes=1)


def epsilon_extrapolated_boundary(spec: ModelSpec, grid: Grid, f_star, sign: int,
                                  eps_list: Optional[Sequence[float]] = None,
                                  guard: float = STRIP_GUARD) -> StripSample:
    """Boundary value at ``y = ±s`` by polynomial extrapolation of ``f(x ± i(s - ε))`` to ``ε = 0``.

    Independent of the principal-value construction in :func:`boundary_value`.
    Each ``ε`` should be several grid spacings wide for the shifted trapezoid
    sums to be accurate.
    """
    s = spec.s
    eps = np.asarray(DEFAULT_EPS if eps_list is None else eps_list, dtype=float) * (s if eps_list is None else 1.0)
    if np.any(eps < guard * s):
        raise NearPole(f"every epsilon must be at least {guard:g}*s")
    f = _values(f_star)
    g = _source(spec, grid, f)
    samples = [strip_convolve(spec.kernel, grid, g, sign * (s - e), guard) for e in eps]
    return StripSample(grid.nodes, sign * s, extrapolate_to_zero(eps, samples))


def build_Y(spec: ModelSpec, grid: Grid, f_star, y: float) -> YFunctions:
    """``Y(x + iy) = exp(a(x + iy) + f(x + iy))``; ``|y| = s`` uses :func:`boundary_value`."""
    s = spec.s
    if abs(y) > s:
        raise NearPole(f"|y| = {abs(y):g} lies outside the closed strip of half-width {s:g}")
    if abs(abs(y) - s) < 1e-14 * s:
        fz = boundary_value(spec, grid, f_star, int(np.sign(y))).values
    elif y == 0:
        fz = _values(f_star).astype(complex)
    else:
        fz = evaluate_strip(spec, grid, f_star, y).values
    z = grid.nodes + 1j * y
    # massive asymptotics overflow at the grid edges; inf is the honest value there
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.exp(spec.a(z) + fz)
    if y == 0:
        vals = vals.real
    return YFunctions(grid.nodes, float(y), vals)


def _continuation_spec(spec: ModelSpec, gauge) -> ModelSpec:
    if gauge is None:
        gauge = "half-g"
    if isinstance(gauge, str) and gauge == "model":
        return spec
    return spec.with_gauge(resolve_gauge(gauge, spec.G))


def _ysystem_defect(spec, grid, f, up, down, margin):
    x = grid.nodes
    s = spec.s
    a0 = np.real(spec.a(x))
    lhs_a = spec.a(x + 1j * s) + spec.a(x - 1j * s) - a0 @ spec.G.T
    lhs = lhs_a + up + down - log_term(a0, f) @ spec.G.T
    mask = grid.interior(margin)
    return float(np.max(np.abs(lhs[mask])))


def ysystem_residual(spec: ModelSpec, grid: Grid, f_star, margin: Optional[float] = None,
                     gauge=None, method: str = "pv", eps_list=None) -> float:
    """Max defect of ``log Y(x+is) + log Y(x-is) = Σ_m G_nm log(1 + Y_m(x))`` on ``|x| <= L - margin``.

    Parameters
    ----------
    margin : float, optional
        Excluded edge band, default ``5 s``.
    gauge : {None, "model", "zero", "half-g", "g"} or matrix
        Gauge used to continue ``f`` to the strip boundary.  The default
        ``G/2`` makes the check sensitive to fixed-point defects of the input;
        with ``C = 0`` the boundary sum reduces to ``L_0[f]`` identically and
        every ``f`` would pass.
    method : {"pv", "extrapolate"}
        Boundary construction: principal value (default) or ε-extrapolation.

    Logs on the real axis use the positive real branch throughout.
    """
    margin = 5.0 * spec.s if margin is None else margin
    cont = _continuation_spec(spec, gauge)
    f = _values(f_star)
    if method == "pv":
        up = boundary_value(cont, grid, f, +1, check=False).values
        down = boundary_value(cont, grid, f, -1, check=False).values
    elif method == "extrapolate":
        up = epsilon_extrapolated_boundary(cont, grid, f, +1, eps_list).values
        down = epsilon_extrapolated_boundary(cont, grid, f, -1, eps_list).values
    else:
        raise ValueError(f"unknown method {method!r}")
    return _ysystem_defect(cont, grid, f, up, down, margin)


def shifted_defect(spec: ModelSpec, grid: Grid, f_star, eps: float, margin: Optional[float] = None,
                   gauge=None) -> float:
    """Y-system defect with the shifts ``±s`` replaced by ``±(s - eps)``; tends to the residual as ``eps -> 0``."""
    margin = 5.0 * spec.s if margin is None else margin
    cont = _continuation_spec(spec, gauge)
    f = _values(f_star)
    y = spec.s - eps
    x = grid.nodes
    up = evaluate_strip(cont, grid, f, y).values + cont.a(x + 1j * y)
    down = evaluate_strip(cont, grid, f, -y).values + cont.a(x - 1j * y)
    a0 = np.real(cont.a(x))
    lhs = up + down - (a0 + log_term(a0, f)) @ cont.G.T
    mask = grid.interior(margin)
    return float(np.max(np.abs(lhs[mask])))
