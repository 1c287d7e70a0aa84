"""Problem instances, the uniform grid, asymptotics and the convolution operator.

Convolutions against Φ_C run on a uniform grid over ``[-L, L]``.  Outside the
interval the sampled function is continued by its end values, and the
resulting tail sums of the kernel are added in closed form (see
:func:`tbalab.kernel.tail_sum`).  With that continuation a constant input is
reproduced to rounding error on every node, edges included, and a massive
solution (which tends to a constant far out) keeps a consistent edge.
Pass ``tails="none"`` for the bare trapezoid rule on ``[-L, L]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np
import scipy.fft

from . import kernel as kern
from .errors import BadGridParams, InvalidAsymptotics, NearPole, NotIrreducible, NegativeEntry
from .spectral import as_matrix, check_mat_lt2, is_irreducible

STRIP_GUARD = 1e-3
ASYMPTOTICS_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    L: float
    M: int

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise BadGridParams(f"half-width must be positive and finite, got {self.L!r}")
        if int(self.M) != self.M or self.M < 3 or self.M % 2 == 0:
            raise BadGridParams(f"number of points must be an odd integer >= 3, got {self.M!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.M - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        # symmetric construction: exact mirror symmetry and an exact zero
        half = (self.M - 1) // 2
        return np.arange(-half, half + 1) * self.h

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.M, self.h)
        w[[0, -1]] *= 0.5
        return w

    def interior(self, margin: float) -> np.ndarray:
        """Boolean mask of nodes with ``|x| <= L - margin``."""
        return np.abs(self.nodes) <= self.L - margin + 1e-12 * self.L


def make_grid(L: float, M: int) -> Grid:
    try:
        return Grid(float(L), int(M) if float(M) == int(M) else M)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, BadGridParams):
            raise
        raise BadGridParams(str(exc)) from exc


@dataclass
class SampledFunction:
    """N-component function sampled on a grid; ``values`` has shape ``(M, N)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.M:
            raise ValueError(f"expected {self.grid.M} samples, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled function has non-finite entries")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def real(self) -> np.ndarray:
        return np.real(self.values)


# --------------------------------------------------------------------------
# asymptotics

KINDS = ("Zero", "MassCosh", "ExpPlus", "ExpMinus", "Sum")


@dataclass(frozen=True)
class AsymptoticsSpec:
    """Symbolic valid asymptotics ``a(z)`` with ``a(x+is) + a(x-is) = G a(x)``.

    ``MassCosh`` is ``r cosh(γz/s) w``, ``ExpPlus``/``ExpMinus`` are
    ``r exp(±γz/s) w``; ``Sum`` adds its ``terms``.
    """

    kind: str = "Zero"
    r: float = 1.0
    gamma: float = 0.0
    w: Optional[tuple] = None
    terms: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidAsymptotics(f"unknown asymptotics kind {self.kind!r}; expected one of {KINDS}")
        if self.w is not None:
            object.__setattr__(self, "w", tuple(float(v) for v in np.ravel(self.w)))
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.kind in ("MassCosh", "ExpPlus", "ExpMinus"):
            if not self.r > 0:
                raise InvalidAsymptotics("scale r must be positive")
            if not 0 < self.gamma < math.pi:
                raise InvalidAsymptotics("gamma must lie in (0, π)")
            if self.w is None or not all(v > 0 for v in self.w):
                raise InvalidAsymptotics("w must be a vector of positive reals")

    @classmethod
    def zero(cls):
        return cls("Zero")

    @classmethod
    def mass_cosh(cls, r, gamma, w):
        return cls("MassCosh", r=float(r), gamma=float(gamma), w=w)

    def validate(self, G, tol: float = ASYMPTOTICS_TOL) -> None:
        """Check ``G w = 2cos(γ) w`` for every exponential term."""
        G = as_matrix(G)
        if self.kind == "Sum":
            for t in self.terms:
                t.validate(G, tol)
            return
        if self.kind == "Zero":
            return
        w = np.array(self.w)
        if w.shape != (G.shape[0],):
            raise InvalidAsymptotics(f"w has {w.size} components but G is {G.shape[0]}x{G.shape[0]}")
        resid = np.max(np.abs(G @ w - 2.0 * math.cos(self.gamma) * w))
        if resid >= tol * max(1.0, np.max(np.abs(w))):
            raise InvalidAsymptotics(
                f"w is not an eigenvector of G with eigenvalue 2cos(gamma)={2 * math.cos(self.gamma):.12g} "
                f"(residual {resid:.3g})"
            )

    def __call__(self, s: float, z, n: int):
        return eval_asymptotics(self, s, z, n)


def eval_asymptotics(spec: AsymptoticsSpec, s: float, z, n: Optional[int] = None) -> np.ndarray:
    """Values of ``a(z)``; shape ``np.shape(z) + (N,)``.  Real input gives real output."""
    z = np.asarray(z)
    if spec.kind == "Sum":
        out = None
        for t in spec.terms:
            v = eval_asymptotics(t, s, z, n)
            out = v if out is None else out + v
        if out is None:
            return np.zeros(z.shape + (n or 1,), dtype=z.dtype if np.iscomplexobj(z) else float)
        return out
    if spec.kind == "Zero":
        if n is None:
            raise ValueError("component count needed for zero asymptotics")
        return np.zeros(z.shape + (n,), dtype=complex if np.iscomplexobj(z) else float)
    arg = spec.gamma * z / s
    with np.errstate(over="ignore"):
        if spec.kind == "MassCosh":
            prof = np.cosh(arg)
        elif spec.kind == "ExpPlus":
            prof = np.exp(arg)
        else:
            prof = np.exp(-arg)
    return spec.r * prof[..., None] * np.array(spec.w)


# --------------------------------------------------------------------------
# problem instance


@dataclass(frozen=True, eq=False)
class ModelSpec:
    s: float
    G: np.ndarray
    C: np.ndarray
    asymptotics: AsymptoticsSpec = field(default_factory=AsymptoticsSpec.zero)

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("s must be positive")
        G = as_matrix(self.G)
        C = as_matrix(self.C)
        if C.shape != G.shape:
            raise ValueError(f"C has shape {C.shape} but G has shape {G.shape}")
        if np.any(G < 0):
            raise NegativeEntry("G must be non-negative")
        if G.shape[0] > 1 and not is_irreducible(G):
            raise NotIrreducible("G must be irreducible")
        check_mat_lt2(G)
        check_mat_lt2(C)
        self.asymptotics.validate(G)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "s", float(self.s))

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @cached_property
    def kernel(self) -> kern.KernelDecomp:
        return kern.build_kernel(self.C, self.s)

    def with_gauge(self, C) -> "ModelSpec":
        return ModelSpec(self.s, self.G, C, self.asymptotics)

    def a(self, z) -> np.ndarray:
        return eval_asymptotics(self.asymptotics, self.s, z, self.n)


# --------------------------------------------------------------------------
# nonlinearity


def log_term(a_vals, f_vals) -> np.ndarray:
    """Componentwise ``log(e^{-a} + e^{f})`` as ``max(-a, f) + log1p(exp(-|f + a|))``."""
    a = np.asarray(a_vals, dtype=float)
    f = np.asarray(f_vals, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.maximum(-a, f) + np.log1p(np.exp(-np.abs(f + a)))
    # a = +inf: the exponential term vanishes exactly
    return np.where(np.isinf(a) & (a > 0), f, out)


def apply_LC(G, C, a_vals, f_vals) -> np.ndarray:
    """``G·log(e^{-a} + e^{f}) - C·f``; the last axis indexes components."""
    G = np.asarray(G, dtype=float)
    C = np.asarray(C, dtype=float)
    f = np.asarray(f_vals, dtype=float)
    return log_term(a_vals, f) @ G.T - f @ C.T


# --------------------------------------------------------------------------
# convolution


class ConvolutionOperator:
    """Discrete ``(Φ_C(· + i y) ⋆ g)(x_i)`` on a grid, kernel tabulated once per offset.

    Parameters
    ----------
    K : KernelDecomp
    grid : Grid
    shift_y : float
        Imaginary shift of the kernel argument.  Must stay ``STRIP_GUARD * s``
        away from every nonzero multiple of ``s`` unless ``boundary`` is set.
    tails : {"constant", "none"}
        Continuation of the input beyond ``[-L, L]``.
    method : {"fft", "direct"}
        ``"direct"`` is the plain offset-indexed sum (``np.convolve``),
        kept as the reference for the FFT path.
    boundary : {None, +1, -1}
        Evaluate the limit ``y -> ±s`` from inside the strip: principal-value
        sum plus the half-residue jump ``g(x)/2``.
    """

    def __init__(self, K, grid: Grid, shift_y: float = 0.0, tails: str = "constant",
                 method: str = "fft", boundary: Optional[int] = None, guard: float = STRIP_GUARD):
        if tails not in ("constant", "none"):
            raise ValueError(f"unknown tails mode {tails!r}")
        if method not in ("fft", "direct"):
            raise ValueError(f"unknown method {method!r}")
        self.K, self.grid, self.tails, self.method = K, grid, tails, method
        s = K.s
        M, h = grid.M, grid.h
        if boundary is not None:
            if boundary not in (1, -1):
                raise ValueError("boundary must be +1 or -1")
            shift_y = boundary * s
        else:
            n = round(shift_y / s)
            if n != 0 and abs(shift_y - n * s) < guard * s:
                raise NearPole(f"shift {shift_y!r} is within {guard:g}*s of the kernel pole row at {n * s:g}i")
        self.shift_y = float(shift_y)
        self.boundary = boundary

        offsets = np.arange(-(M - 1), M) * h
        z = offsets + 1j * self.shift_y
        if boundary is not None:
            z[M - 1] = 0.0  # placeholder, replaced by the regular part below
        table = h * kern.phi_matrix(K, z if self.shift_y != 0 else offsets, guard=0.0 if boundary else kern.POLE_GUARD)
        if boundary is not None:
            table[M - 1] = h * kern.regular_part_matrix(K)
        self.is_real = self.shift_y == 0.0
        if self.is_real:
            table = np.real(table)
        self.table = table  # (2M-1, N, N)

        if tails == "constant":
            pos = table[M:]  # offsets +1 .. M-1
            neg = table[M - 2::-1]  # offsets -1 .. -(M-1)
            t_pos_M = kern.tail_matrix(K, h, M, self.shift_y)
            t_neg_M = kern.tail_matrix(K, h, M, -self.shift_y)
            if self.is_real:
                t_pos_M, t_neg_M = t_pos_M.real, t_neg_M.real
            # T(n) = T(M) + sum_{m=n}^{M-1} table(m),  n = 1..M
            t_pos = np.concatenate([np.cumsum(pos[::-1], axis=0)[::-1], np.zeros((1,) + pos.shape[1:])]) + t_pos_M
            t_neg = np.concatenate([np.cumsum(neg[::-1], axis=0)[::-1], np.zeros((1,) + neg.shape[1:])]) + t_neg_M
            i = np.arange(M)
            self.left_tail = t_pos[i]  # T_{+y}(i+1)
            self.right_tail = t_neg[M - 1 - i]  # T_{-y}(M-i)
        self._fft = None

    # FFT of the kernel table, cached
    def _kernel_fft(self, nfft):
        if self._fft is None or self._fft[0] != nfft:
            if self.is_real:
                kf = scipy.fft.rfft(self.table, n=nfft, axis=0)
            else:
                kf = scipy.fft.fft(self.table, n=nfft, axis=0)
            self._fft = (nfft, kf)
        return self._fft[1]

    def _toeplitz_apply(self, q: np.ndarray) -> np.ndarray:
        M = self.grid.M
        if self.method == "direct":
            N = q.shape[1]
            dtype = complex if (not self.is_real or np.iscomplexobj(q)) else float
            out = np.zeros((M, N), dtype=dtype)
            for n in range(N):
                for m in range(N):
                    out[:, n] += np.convolve(self.table[:, n, m], q[:, m], mode="valid")
            return out
        nfft = scipy.fft.next_fast_len(3 * M - 2, real=self.is_real)
        kf = self._kernel_fft(nfft)
        if self.is_real and not np.iscomplexobj(q):
            qf = scipy.fft.rfft(q, n=nfft, axis=0)
            full = scipy.fft.irfft(np.einsum("fnm,fm->fn", kf, qf), n=nfft, axis=0)
        else:
            if self.is_real:
                kf = scipy.fft.fft(self.table, n=nfft, axis=0)
            qf = scipy.fft.fft(q, n=nfft, axis=0)
            full = scipy.fft.ifft(np.einsum("fnm,fm->fn", kf, qf), n=nfft, axis=0)
        return full[M - 1:2 * M - 1]

    def __call__(self, g) -> np.ndarray:
        g = np.asarray(g)
        if g.ndim == 1:
            g = g[:, None]
        out = self._toeplitz_apply(g)
        M = self.grid.M
        if self.tails == "constant":
            out = out + np.einsum("inm,m->in", self.right_tail, g[-1]) + np.einsum("inm,m->in", self.left_tail, g[0])
        else:
            i = np.arange(M)
            out = out - 0.5 * np.einsum("inm,m->in", self.table[i + (M - 1)], g[0])
            out = out - 0.5 * np.einsum("inm,m->in", self.table[i], g[-1])
        if self.boundary is not None:
            # half-residue jump plus the cell correction of the pole part
            h = self.grid.h
            dg = np.gradient(g, h, axis=0, edge_order=2)
            pole = self.boundary / (2j * math.pi)
            out = out + 0.5 * g - pole * h * dg
        return out


def convolve(K, grid: Grid, g, shift_y: float = 0.0, **kwargs) -> SampledFunction:
    """``h(x_i) = Σ_j w_j Φ_C(x_i - x_j + i·shift_y) g(x_j)`` plus the tail continuation.

    ``g`` may be a :class:`SampledFunction` or an ``(M, N)`` array.
    """
    vals = g.values if isinstance(g, SampledFunction) else g
    op = ConvolutionOperator(K, grid, shift_y, **kwargs)
    return SampledFunction(grid, op(vals))
