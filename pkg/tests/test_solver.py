import json
import math

import numpy as np
import pytest
from scipy import integrate

from tbalab import (AsymptoticsSpec, ModelSpec, build_kernel, contraction_estimate, dynkin_adjacency, kappa_pf,
                    make_grid, perron_frobenius, phi_matrix, solve_constant, solve_tba, verify_c_independence)
from tbalab.errors import GridTooCoarse, NoConvergence
from tbalab.solver import SolveReport, SolverOptions, TBAMap, kappa_from_lambda, resolve_gauge

from conftest import yang_lee_spec


def test_contraction_estimate_single_equation():
    for c, kappa in ((0.0, 0.5), (0.5, 1 / 3), (1.0, 1.0)):
        assert contraction_estimate([[1.0]], [[c]], [1.0]) == pytest.approx(kappa, rel=1e-14)


def test_contraction_estimate_negative_gauge_uses_quadrature():
    # scalar φ_d is positive for every admissible d, so quadrature recovers 1/(2-c)
    assert contraction_estimate([[1.0]], [[-0.5]], [1.0]) == pytest.approx(1.5 / 2.5, rel=1e-10)
    # skewed eigenbasis: Φ_11 = (φ_{1.5} - 4 φ_{-1.5}) / -3 changes sign, so ∫|Φ| > |∫Φ|
    G = dynkin_adjacency("A", 2)
    T = np.array([[1.0, 1.0], [4.0, 1.0]])
    C = T @ np.diag([1.5, -1.5]) @ np.linalg.inv(T)
    K = build_kernel(C, 1.0)
    x = np.linspace(-40, 40, 16001)
    vals = phi_matrix(K, x)
    assert vals[:, 0, 0].min() < 0 < vals[:, 0, 0].max()
    absint = integrate.trapezoid(np.abs(vals), x, axis=0)
    M = np.maximum(np.abs(C), np.abs(G - C))
    est = contraction_estimate(G, C, np.ones(2))
    assert est == pytest.approx(np.max(absint @ M.sum(axis=1)), rel=1e-5)
    signed = np.abs(np.linalg.inv(2 * np.eye(2) - C))
    assert absint[0, 0] > signed[0, 0] + 1e-3


def test_contraction_estimate_is_s_independent():
    G = dynkin_adjacency("A", 2)
    w = perron_frobenius(G).w
    assert contraction_estimate(G, G / 2, w, s=0.3) == pytest.approx(contraction_estimate(G, G / 2, w, s=3.0))


def test_kappa_pf_below_one_for_catalog():
    assert kappa_pf(dynkin_adjacency("E", 8)) < 1
    assert kappa_from_lambda(2.0) == 1.0


def test_solve_constant_substitution():
    for fam, rank in (("D", 5), ("E", 6), ("T", 3), ("B", 3), ("G", 2)):
        G = dynkin_adjacency(fam, rank)
        Y = solve_constant(G)
        assert np.all(Y > 0)
        assert np.max(np.abs(Y**2 - np.prod((1 + Y)[None, :] ** G, axis=1))) < 1e-11 * np.max(Y) ** 2


def test_grid_too_coarse():
    spec = ModelSpec(1.0, [[1.0]], [[0.5]])
    with pytest.raises(GridTooCoarse):
        solve_tba(spec, make_grid(8.0, 65))


def test_no_convergence_carries_report():
    spec = ModelSpec(1.0, [[1.0]], [[0.5]])
    with pytest.raises(NoConvergence) as info:
        solve_tba(spec, make_grid(5.0, 201), SolverOptions(tol=1e-15, max_iter=3))
    assert isinstance(info.value.report, SolveReport)
    assert info.value.report.iterations == 3 and not info.value.report.converged
    assert info.value.result.values.shape == (201, 1)


def test_a_priori_error_bound():
    # |f_k - f*| <= κ^k/(1-κ) |f_1 - f_0| in the w-weighted sup norm
    G = dynkin_adjacency("A", 3)
    spec = ModelSpec(1.0, G, G / 2)
    grid = make_grid(10.0, 401)
    f_star, rep = solve_tba(spec, grid, SolverOptions(tol=1e-14))
    w = perron_frobenius(G).w
    kappa = kappa_pf(G)
    T = TBAMap(spec, grid)
    f = np.zeros((grid.M, 3))
    d0 = np.max(np.abs(T(f) / w))
    for k in range(1, 15):
        f = T(f)
        err = np.max(np.abs((f - f_star.values) / w))
        assert err <= kappa**k / (1 - kappa) * d0 + 1e-13
    assert rep.kappa_observed <= rep.kappa_estimate + 5e-3


def test_damping_and_rescaling_reach_the_same_fixed_point():
    spec = yang_lee_spec()
    grid = make_grid(15.0, 1201)
    f0, r0 = solve_tba(spec, grid)
    f1, r1 = solve_tba(spec, grid, SolverOptions(damping=0.7))
    f2, _ = solve_tba(spec, grid, SolverOptions(rescaled=True))
    assert r1.iterations > r0.iterations
    assert np.max(np.abs(f0.values - f1.values)) < 1e-11
    assert np.array_equal(f0.values, f2.values)


def test_yang_lee_solution_properties(yang_lee):
    spec, grid, sol, rep = yang_lee
    f = sol.values[:, 0]
    assert rep.converged and rep.final_residual < 1e-12
    assert np.max(np.abs(f - f[::-1])) < 1e-14
    # f -> log of the constant solution far from the origin, no driving there
    assert rep.kappa_estimate == pytest.approx(1 / 3)
    assert rep.kappa_observed < 1 / 3 + 5e-3


def test_report_json_round_trip(yang_lee):
    rep = yang_lee[3]
    d = rep.to_dict()
    assert json.loads(json.dumps(d)) == d


def test_gauge_sweep_and_resolution():
    G = dynkin_adjacency("A", 2)
    assert np.array_equal(resolve_gauge("g", G), G)
    assert np.array_equal(resolve_gauge([[0, 0.5], [0.5, 0]], G), G / 2)
    with pytest.raises(ValueError):
        resolve_gauge("nope", G)
    sweep = verify_c_independence(ModelSpec(1.0, G, G / 2), make_grid(10.0, 401), ["zero", "half-g"])
    assert sweep.max_deviation < 1e-12
    assert len(sweep.to_dict()["reports"]) == 2


def test_massive_a3_converges():
    G = dynkin_adjacency("A", 3)
    pf = perron_frobenius(G)
    spec = ModelSpec(1.0, G, G / 2, AsymptoticsSpec.mass_cosh(1.0, math.acos(pf.lambda_pf / 2), pf.w))
    sol, rep = solve_tba(spec, make_grid(20.0, 1601))
    assert rep.converged
    assert np.all(np.isfinite(sol.values))
