r"""Scalar Green's function φ_d and the matrix kernel Φ_C.

The scalar kernel inverts the difference operator
``f(x+is) + f(x-is) - d f(x)`` and has the closed form

.. math:: φ_d(z) = \frac{1}{2 s \sin γ} \frac{\sinh((π-γ) z/s)}{\sinh(π z/s)},
          \qquad d = 2\cos γ,\ γ∈(0, π).

It is evaluated in the equivalent form
``exp(-γ w/s) * expm1(-2(π-γ) w/s) / expm1(-2π w/s)`` with ``w = ±z`` chosen so
that ``Re w >= 0``; this never overflows, whatever ``|Re z|`` is.

The matrix kernel Φ_C is assembled from scalar kernels through the real
eigendecomposition of ``C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import NearPole, SpectralRadiusTooLarge
from .spectral import SpectralData, check_mat_lt2, IMAG_TOL

DELTA_MIN = 1e-6
POLE_GUARD = 1e-8
SMALL_Z = 1e-6


@dataclass(frozen=True)
class ScalarKernelParams:
    d: float
    s: float
    gamma: float

    @classmethod
    def from_d(cls, d: float, s: float, delta_min: float = DELTA_MIN) -> "ScalarKernelParams":
        d = float(d)
        s = float(s)
        if not s > 0:
            raise ValueError("shift parameter s must be positive")
        if not abs(d) <= 2.0 - delta_min:
            raise SpectralRadiusTooLarge(
                f"kernel parameter d={d!r} is outside the guard band |d| <= 2 - {delta_min:g}"
            )
        return cls(d=d, s=s, gamma=math.acos(d / 2.0))

    @property
    def prefactor(self) -> float:
        return 1.0 / (2.0 * self.s * math.sin(self.gamma))

    @property
    def value_at_zero(self) -> float:
        """``φ_d(0) = (π-γ) / (2π s sin γ)``."""
        return (math.pi - self.gamma) / (2.0 * math.pi * self.s * math.sin(self.gamma))

    @property
    def regular_part_at_pole(self) -> float:
        """Finite part of φ_d at ``z = ±is`` after removing ``±1/(2πi(z ∓ is))``."""
        g = self.gamma
        return math.cos(g) * (math.pi - g) / (2.0 * math.pi * self.s * math.sin(g))


def _check_poles(z: np.ndarray, s: float, guard: float) -> None:
    n = np.rint(z.imag / s)
    n = np.where(n == 0, np.where(z.imag < 0, -1.0, 1.0), n)
    dist = np.abs(z - 1j * s * n)
    if dist.size and np.min(dist) < guard * s:
        k = int(np.argmin(dist))
        raise NearPole(
            f"z={z.ravel()[k]!r} is within {dist.ravel()[k]:.3g} of the kernel pole at "
            f"{s * n.ravel()[k]:g}i"
        )


def phi_d(params: ScalarKernelParams, z, guard: float = POLE_GUARD):
    """Evaluate φ_d at complex ``z`` (scalar or array).

    Raises
    ------
    NearPole
        If some ``z`` lies within ``guard * s`` of a pole ``i s n``, ``n != 0``.
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s, g = params.s, params.gamma
    _check_poles(z, s, guard)

    w = np.where(z.real < 0, -z, z)
    alpha = (math.pi - g) / s
    beta = math.pi / s
    small = np.abs(w) < SMALL_Z * s
    w_big = np.where(small, 1.0, w)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.exp(-g * w_big / s) * np.expm1(-2.0 * alpha * w_big) / np.expm1(-2.0 * beta * w_big)
    if np.any(small):
        w2 = w[small] ** 2
        ratio[small] = (alpha / beta) * (1.0 + (alpha**2 - beta**2) * w2 / 6.0)
    out = params.prefactor * ratio
    return out[0] if scalar else out


def phi(d: float, s: float, z, guard: float = POLE_GUARD):
    """Shorthand for ``phi_d(ScalarKernelParams.from_d(d, s), z)``."""
    return phi_d(ScalarKernelParams.from_d(d, s), z, guard)


def phi_d_fourier_oracle(d: float, s: float, x, k_max: float | None = None, n_k: int | None = None):
    """φ_d(x) on the real axis from its Fourier integral, by the trapezoid rule.

    ``(1/2π) ∫ e^{ikx} / (2 cosh(sk) - d) dk`` over ``[-k_max, k_max]``.  The
    integrand is analytic for ``|Im k| < γ/s``, so the default node count is
    picked to make the aliasing error ``~exp(γ|x|/s - 2πγ/(s Δk))`` negligible.
    Test oracle only.
    """
    x = np.asarray(x, dtype=float)
    gamma = math.acos(d / 2.0)
    if k_max is None:
        k_max = 40.0 / s
    if n_k is None:
        width = gamma / s
        xmax = float(np.max(np.abs(x))) if x.size else 0.0
        dk = 2.0 * math.pi * width / (40.0 + width * xmax)
        n_k = 2 * int(math.ceil(k_max / dk)) + 1
    k = np.linspace(-k_max, k_max, n_k)
    dk = k[1] - k[0]
    weights = np.full(n_k, dk)
    weights[[0, -1]] *= 0.5
    denom = 2.0 * np.cosh(s * k) - d
    # even integrand: cos instead of exp
    vals = np.cos(np.multiply.outer(x, k)) @ (weights / denom)
    return vals / (2.0 * math.pi)


def cosh_power_fourier(m: int, k):
    r"""``∫ e^{-ikx} cosh(x)^{-m} dx`` in closed form.

    .. math:: \frac{π}{(m-1)!} \prod_{l=m-2,\,m-4,\dots \ge 1} (k^2 + l^2)
              \times \begin{cases} 1/\cosh(πk/2) & m\ \text{odd} \\
                                   k/\sinh(πk/2) & m\ \text{even}\end{cases}
    """
    m = int(m)
    if m < 1:
        raise ValueError("m must be a positive integer")
    scalar = np.ndim(k) == 0
    k = np.asarray(k, dtype=float)
    prod = np.ones_like(k)
    for l in range(m - 2, 0, -2):
        prod = prod * (k * k + l * l)
    if m % 2:
        tail = 1.0 / np.cosh(0.5 * math.pi * k)
    else:
        small = np.abs(k) < 1e-8
        ks = np.where(small, 1.0, k)
        tail = np.where(small, 2.0 / math.pi, ks / np.sinh(0.5 * math.pi * ks))
    out = math.pi / math.factorial(m - 1) * prod * tail
    return float(out) if scalar else out


def neumann_term(j: int, s: float, x):
    """``(1/2π) ∫ e^{ikx} (2 cosh(sk))^{-j-1} dk``, the j-th Neumann-series coefficient function."""
    m = j + 1
    return cosh_power_fourier(m, np.asarray(x, dtype=float) / s) / (2.0 * math.pi * s * 2.0**m)


def residue_contour(params: ScalarKernelParams, n: int, radius: float | None = None, nodes: int = 2048) -> complex:
    """``∮ φ_d(z) dz`` around ``i s n`` on a circle of radius ``s/4`` (trapezoid rule)."""
    if radius is None:
        radius = params.s / 4.0
    theta = 2.0 * math.pi * np.arange(nodes) / nodes
    e = np.exp(1j * theta)
    z = 1j * params.s * n + radius * e
    vals = phi_d(params, z)
    return complex(np.sum(vals * 1j * radius * e) * (2.0 * math.pi / nodes))


def tail_sum(params: ScalarKernelParams, h: float, n, y: float = 0.0):
    """``h Σ_{m>=n} φ_d(m h + i y)`` for integer ``n >= 1``, summed in closed form.

    For ``Re z > 0`` the kernel expands into decaying exponentials
    ``Σ_k e^{-(γ+2kπ) z/s} - e^{-(2π-γ+2kπ) z/s}``; each geometric sum over
    ``m`` is done exactly and the ``k`` series is truncated once its terms fall
    below double precision.
    """
    scalar = np.ndim(n) == 0
    n = np.atleast_1d(np.asarray(n, dtype=float))
    if np.any(n < 1):
        raise ValueError("tail sums start at offset n >= 1")
    s, g = params.s, params.gamma
    z = n * h + 1j * y
    x0 = float(np.min(n)) * h
    k_max = int(math.ceil(40.0 * s / (2.0 * math.pi * x0))) + 1
    if k_max > 200_000:
        raise ValueError("tail sum requested too close to the origin; use direct summation")
    total = np.zeros(n.shape, dtype=complex)
    for k in range(k_max + 1):
        c1 = (g + 2.0 * math.pi * k) / s
        c2 = (2.0 * math.pi - g + 2.0 * math.pi * k) / s
        total += np.exp(-c1 * z) / -math.expm1(-c1 * h) - np.exp(-c2 * z) / -math.expm1(-c2 * h)
    out = h * params.prefactor * total
    return out[0] if scalar else out


@dataclass(frozen=True)
class KernelDecomp:
    spectral: SpectralData
    s: float
    scalar_params: List[ScalarKernelParams]

    @property
    def n(self) -> int:
        return len(self.scalar_params)

    def combine(self, diag_values) -> np.ndarray:
        """``T diag(v) T^{-1}`` for a stack of diagonal vectors ``v`` (last axis = N)."""
        T = self.spectral.right_eigenvectors
        Tinv = self.spectral.inverse
        return np.einsum("ij,...j,jk->...ik", T, np.asarray(diag_values), Tinv)


def build_kernel(C, s: float, tol: float = IMAG_TOL, delta_min: float = DELTA_MIN) -> KernelDecomp:
    """Eigendecompose ``C`` and set up one scalar kernel per eigenvalue."""
    spec = check_mat_lt2(C, tol)
    params = [ScalarKernelParams.from_d(d, s, delta_min) for d in spec.eigenvalues]
    return KernelDecomp(spectral=spec, s=float(s), scalar_params=params)


def phi_matrix(K: KernelDecomp, z, guard: float = POLE_GUARD) -> np.ndarray:
    """Φ_C(z) with shape ``np.shape(z) + (N, N)``.

    Real-valued input gives a matrix whose imaginary part is zero up to
    rounding; the real part is returned in that case.
    """
    z_arr = np.asarray(z)
    vals = np.stack([phi_d(p, z_arr, guard) for p in K.scalar_params], axis=-1)
    out = K.combine(vals)
    if not np.iscomplexobj(z_arr):
        return out.real
    return out


def kernel_total_integral(K: KernelDecomp) -> np.ndarray:
    """``∫ Φ_C(x) dx = (2·1 - C)^{-1}``, assembled from the eigendecomposition."""
    return K.combine(1.0 / (2.0 - K.spectral.eigenvalues))


def regular_part_matrix(K: KernelDecomp) -> np.ndarray:
    """Finite part of Φ_C at ``±is``; the pole part is ``±1/(2πi(z ∓ is))`` times the identity."""
    return K.combine([p.regular_part_at_pole for p in K.scalar_params])


def tail_matrix(K: KernelDecomp, h: float, n, y: float = 0.0) -> np.ndarray:
    """Matrix version of :func:`tail_sum`."""
    vals = np.stack([np.atleast_1d(tail_sum(p, h, n, y)) for p in K.scalar_params], axis=-1)
    out = K.combine(vals)
    return out[0] if np.ndim(n) == 0 else out
