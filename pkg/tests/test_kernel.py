import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from tbalab import build_kernel, cosh_power_fourier, neumann_term, phi, phi_d, phi_matrix
from tbalab.errors import NearPole, SpectralRadiusTooLarge
from tbalab.kernel import (ScalarKernelParams, kernel_total_integral, phi_d_fourier_oracle, regular_part_matrix,
                           tail_matrix, tail_sum)


def naive_phi(d, s, z):
    g = math.acos(d / 2)
    return np.sinh((math.pi - g) * z / s) / np.sinh(math.pi * z / s) / (2 * s * math.sin(g))


def test_matches_naive_formula_where_safe():
    z = np.linspace(-5, 5, 101) + 0.3j
    for d in (-1.5, 0.2, 1.7):
        assert np.allclose(phi(d, 1.3, z), naive_phi(d, 1.3, z), rtol=1e-13, atol=0)


def test_no_overflow_far_out():
    p = ScalarKernelParams.from_d(1.0, 1.0)
    v = phi_d(p, np.array([800.0, -800.0, 1e5 + 0.5j]))
    assert np.all(np.isfinite(v))
    assert abs(v[0]) < 1e-300 or v[0] >= 0


def test_value_at_zero_and_series_branch():
    p = ScalarKernelParams.from_d(0.7, 2.0)
    assert phi_d(p, 0.0).real == pytest.approx(p.value_at_zero, rel=1e-15)
    assert phi_d(p, 1e-7).real == pytest.approx(naive_phi(0.7, 2.0, 1e-3), rel=1e-6)


def test_decay_rate_is_gamma():
    d, s = 1.0, 1.0
    g = math.acos(d / 2)
    x1, x2 = 20.0, 21.0
    rate = math.log(phi(d, s, x1).real / phi(d, s, x2).real)
    assert rate == pytest.approx(g / s, rel=1e-12)


def test_total_integral():
    for d in (-1.5, 0.0, 1.8):
        val, _ = integrate.quad(lambda x: phi(d, 1.0, x).real, -np.inf, np.inf, epsabs=1e-13)
        assert val == pytest.approx(1.0 / (2 - d), rel=1e-10)


@settings(max_examples=200, deadline=None, derandomize=True)
@given(d=st.floats(-1.99, 1.99), s=st.floats(0.2, 5.0), x=st.floats(0.05, 10.0), y=st.floats(-0.9, 0.9))
def test_functional_relation_property(d, s, x, y):
    p = ScalarKernelParams.from_d(d, s)
    z = complex(x * s, y * s)
    r = phi_d(p, z + 1j * s) + phi_d(p, z - 1j * s) - d * phi_d(p, z)
    scale = abs(phi_d(p, z + 1j * s)) + abs(phi_d(p, z - 1j * s)) + 1.0
    assert abs(r) < 1e-12 * scale


@settings(max_examples=50, deadline=None, derandomize=True)
@given(d=st.floats(-1.9, 1.9), x=st.floats(-6, 6))
def test_even_and_real(d, x):
    p = ScalarKernelParams.from_d(d, 1.0)
    assert phi_d(p, x) == pytest.approx(phi_d(p, -x), rel=1e-14)
    assert phi_d(p, complex(x, 0.4)) == pytest.approx(np.conj(phi_d(p, complex(x, -0.4))), rel=1e-14)


def test_near_pole_and_guard_band():
    p = ScalarKernelParams.from_d(0.5, 1.0)
    with pytest.raises(NearPole):
        phi_d(p, 1e-10 + 1j)
    with pytest.raises(NearPole):
        phi_d(p, -2j)
    with pytest.raises(SpectralRadiusTooLarge):
        ScalarKernelParams.from_d(2.0 - 1e-7, 1.0)


def test_regular_part_at_pole():
    p = ScalarKernelParams.from_d(0.4, 1.5)
    for sign in (1, -1):
        eps = 1e-5
        z = sign * 1.5j + eps
        sing = sign / (2j * math.pi * (z - sign * 1.5j))
        assert (phi_d(p, z) - sing).real == pytest.approx(p.regular_part_at_pole, abs=1e-5)


def test_neumann_series_sums_to_kernel():
    # φ_d = Σ_j d^j * term_j for |d| < 2
    x = np.linspace(-4, 4, 17)
    d = 0.6
    total = sum(d**j * neumann_term(j, 1.0, x) for j in range(60))
    assert np.allclose(total, phi(d, 1.0, x).real, atol=1e-14)


def test_cosh_power_fourier_matches_quadrature_at_nonzero_k():
    for m in (1, 2, 3, 4):
        for k in (0.5, 2.0):
            val, _ = integrate.quad(lambda x: math.cos(k * x) * math.cosh(x) ** -m, 0, 60, limit=400)
            assert cosh_power_fourier(m, k) == pytest.approx(2 * val, abs=1e-12)


def test_fourier_oracle_is_independent_of_node_choice():
    x = np.array([0.0, 1.0, 3.5])
    a = phi_d_fourier_oracle(1.2, 1.0, x)
    b = phi_d_fourier_oracle(1.2, 1.0, x, k_max=50.0, n_k=40001)
    assert np.allclose(a, b, atol=1e-13)


def test_tail_sum_matches_direct_sum():
    p = ScalarKernelParams.from_d(-0.8, 1.0)
    h = 0.05
    m = np.arange(40, 20000)
    for y in (0.0, 0.6, -0.3):
        direct = h * np.sum(phi_d(p, m * h + 1j * y))
        assert tail_sum(p, h, 40, y) == pytest.approx(direct, abs=1e-14)


def test_matrix_kernel():
    C = np.array([[0.3, -0.4], [0.1, -1.2]])
    K = build_kernel(C, 1.0)
    assert np.allclose(kernel_total_integral(K), np.linalg.inv(2 * np.eye(2) - C), atol=1e-14)
    z = np.array([0.5 + 0.2j, -1.0])
    M = phi_matrix(K, z)
    F = lambda w: phi_matrix(K, w)  # noqa: E731
    r = F(z + 1j) + F(z - 1j) - np.einsum("ij,njk->nik", C, M)
    assert np.max(np.abs(r)) < 1e-13
    assert regular_part_matrix(K).shape == (2, 2)
    assert tail_matrix(K, 0.1, 5).shape == (2, 2)
    # real input gives real output
    assert phi_matrix(K, np.array([0.1, 0.2])).dtype == float
