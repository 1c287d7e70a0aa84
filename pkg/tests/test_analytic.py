import numpy as np
import pytest

from tbalab import build_kernel, build_Y, evaluate_strip, make_grid, solve_tba, ysystem_residual
from tbalab.analytic import boundary_value, epsilon_extrapolated_boundary, extrapolate_to_zero, shifted_defect
from tbalab.errors import NearPole, NotConverged
from tbalab.model import ConvolutionOperator

from conftest import yang_lee_spec


def test_extrapolation_is_exact_for_polynomials():
    eps = [0.3, 0.2, 0.1, 0.05]
    vals = [np.array([2.0 + 3 * e - e**3]) for e in eps]
    assert extrapolate_to_zero(eps, vals)[0] == pytest.approx(2.0, abs=1e-13)


def test_strip_at_zero_reproduces_solution(yang_lee):
    spec, grid, sol, _ = yang_lee
    s0 = evaluate_strip(spec, grid, sol, 0.0)
    assert np.max(np.abs(s0.values - sol.values)) < 1e-12


def test_schwarz_reflection(yang_lee):
    spec, grid, sol, _ = yang_lee
    up = evaluate_strip(spec, grid, sol, 0.6)
    down = evaluate_strip(spec, grid, sol, -0.6)
    assert up.conj_mismatch(down) < 1e-14


def test_boundary_constructions_agree(yang_lee):
    spec, grid, sol, _ = yang_lee
    mask = grid.interior(5.0)
    pv = boundary_value(spec, grid, sol, 1).values
    ext = epsilon_extrapolated_boundary(spec, grid, sol, 1).values
    assert np.max(np.abs(pv - ext)[mask]) < 1e-5


def test_boundary_requires_fixed_point(yang_lee):
    spec, grid, sol, _ = yang_lee
    with pytest.raises(NotConverged):
        boundary_value(spec, grid, sol.values + 1e-3, 1)


def test_shifted_defect_approaches_residual(yang_lee):
    spec, grid, sol, _ = yang_lee
    d = [shifted_defect(spec, grid, sol, e) for e in (0.4, 0.2, 0.1)]
    assert d[0] > d[1] > d[2]


def test_y_functions(yang_lee):
    spec, grid, sol, _ = yang_lee
    Y0 = build_Y(spec, grid, sol, 0.0)
    assert np.all(Y0.values > 0)
    Yb = build_Y(spec, grid, sol, 1.0)
    assert Yb.min_modulus > 0
    with pytest.raises(NearPole):
        build_Y(spec, grid, sol, 1.2)


def test_residual_and_negative_control(yang_lee):
    spec, grid, sol, _ = yang_lee
    assert ysystem_residual(spec, grid, sol) < 1e-5
    assert ysystem_residual(spec, grid, sol, gauge="zero") < 1e-5
    assert ysystem_residual(spec, grid, np.zeros_like(sol.values)) > 1e-2
    # perturbed solution is detected
    assert ysystem_residual(spec, grid, sol.values + 1e-2 * np.exp(-grid.nodes**2)[:, None]) > 1e-3


def test_coarse_grid_fails_extrapolated_check():
    spec = yang_lee_spec()
    grid = make_grid(6.0, 65)
    sol, _ = solve_tba(spec, grid)
    assert ysystem_residual(spec, grid, sol, method="extrapolate") > 1e-5


def test_jump_across_pole_row():
    # continuing past y = s picks up g(x + i(y - s)); the midpoint of both sides
    # matches the principal-value boundary value to O(δ^2)
    K = build_kernel([[0.5]], 1.0)
    grid = make_grid(20.0, 8193)
    x = grid.nodes
    g = np.exp(-x**2 / 2)[:, None]
    mask = np.abs(x) < 10
    bd = ConvolutionOperator(K, grid, boundary=1)(g)
    errs = []
    for d in (0.2, 0.1, 0.05):
        inside = ConvolutionOperator(K, grid, 1 - d)(g)
        outside = ConvolutionOperator(K, grid, 1 + d)(g) + np.exp(-(x + 1j * d) ** 2 / 2)[:, None]
        errs.append(np.max(np.abs((inside + outside) / 2 - bd)[mask]))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)
