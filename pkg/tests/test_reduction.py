"""Nemitski operators, tail contraction, bifurcation solves, functionals."""

import math

import numpy as np
import pytest

from finite_proxy import (
    DomainError,
    Geometry,
    NonContractionError,
    ResolutionError,
    SolverError,
    SpaceTimeField,
    apply_nemitski,
    bifurcation_residual,
    functional_I_and_N,
    functional_J,
    reconstruct_full_solution,
    reduced_rhs_phi,
    solve_static_reduced,
    solve_wave_reduced,
    static_problem,
    tail_fixed_point,
    wave_problem,
)
from finite_proxy import nonlinearity as nl
from finite_proxy.reduction import forward_map, mu_time_profiles, reduced_action_static
from finite_proxy.spectral import apply_inverse_operator

from oracles import (
    dense_newton_solve,
    dense_newton_tail,
    fd_gradient,
    quadrature_sine_coefficients,
)

L_PI = Geometry(L=math.pi)
WAVE_GEO = Geometry(L=2 * math.pi, T=1.0)


def _table_nl():
    xs = np.linspace(-6.0, 6.0, 41)
    return nl.table_spline(xs, 0.3 + 0.08 * np.sin(xs))


def _core_field(problem, values):
    flat = np.zeros(problem.basis.size)
    idx = np.where(problem.basis.core_mask().ravel())[0]
    flat[idx[: len(values)]] = values
    return SpaceTimeField(problem.basis, flat.reshape(problem.basis.shape))


# ---------------------------------------------------------------- nemitski

def test_nemitski_zero_is_zero():
    p = static_problem(L_PI, nl.zero(), cutoff=2, k_max=16)
    rng = np.random.default_rng(0)
    fld = SpaceTimeField(p.basis, rng.standard_normal(16))
    out = apply_nemitski(nl.zero(), fld, p.resolution)
    assert np.all(out.coeffs == 0.0)


def test_nemitski_constant_ignores_field():
    p = static_problem(L_PI, nl.constant(2.5), cutoff=2, k_max=16)
    rng = np.random.default_rng(1)
    f1 = SpaceTimeField(p.basis, rng.standard_normal(16))
    f2 = SpaceTimeField(p.basis, rng.standard_normal(16))
    out1 = apply_nemitski(nl.constant(2.5), f1, p.resolution)
    out2 = apply_nemitski(nl.constant(2.5), f2, p.resolution)
    np.testing.assert_array_equal(out1.coeffs, out2.coeffs)
    unit = apply_nemitski(nl.constant(1.0), f1, p.resolution)
    np.testing.assert_allclose(out1.coeffs, 2.5 * unit.coeffs, rtol=1e-14)


def test_nemitski_sine_matches_dense_oracle():
    case = nl.scaled_sine(0.1)
    p = static_problem(L_PI, case, cutoff=2, k_max=16)
    coeffs = np.zeros(16)
    coeffs[0] = 1.0
    fld = SpaceTimeField(p.basis, coeffs)
    out = apply_nemitski(case, fld, p.resolution)

    def f_of_u(x):
        return case(p.basis.evaluate(coeffs, x))

    oracle = quadrature_sine_coefficients(f_of_u, math.pi, 16,
                                          n_grid=4 * p.resolution)
    scale = np.max(np.abs(oracle))
    assert np.max(np.abs(out.coeffs - oracle)) <= 1e-8 * scale


def test_nemitski_resolution_guard():
    p = static_problem(L_PI, nl.scaled_sine(0.1), cutoff=2, k_max=16)
    fld = SpaceTimeField.zero(p.basis)
    with pytest.raises(ResolutionError):
        apply_nemitski(nl.scaled_sine(0.1), fld, resolution=32)


def test_nemitski_degenerate_norm_guard():
    p = static_problem(L_PI, nl.scaled_sine(0.1), cutoff=2, k_max=16)
    coeffs = np.zeros(16)
    coeffs[0] = 1e7
    with pytest.raises(DomainError):
        apply_nemitski(nl.scaled_sine(0.1), SpaceTimeField(p.basis, coeffs),
                       p.resolution)


# ---------------------------------------------------------- tail fixed point

def test_tail_zero_nonlinearity_one_iteration():
    p = static_problem(L_PI, nl.zero(), cutoff=2, k_max=16)
    eta, log = tail_fixed_point(p, p.zero_field())
    assert np.all(eta.coeffs == 0.0)
    assert log.iterations == 1


def test_tail_wave_constant_source_in_core():
    # the constant spatial channel k = 0 lies in the core for any R >= 0,
    # so Q_R F = 0 and the tail vanishes
    p = wave_problem(WAVE_GEO, nl.constant(0.7), cutoff=1, k_max=8, j_max=6)
    eta, log = tail_fixed_point(p, p.zero_field())
    assert np.max(np.abs(eta.coeffs)) == 0.0
    assert log.iterations <= 2


def test_tail_matches_dense_newton_static_sine():
    case = nl.scaled_sine(0.05)
    p = static_problem(L_PI, case, cutoff=2, k_max=16)
    mu = _core_field(p, [1.0, -0.5])
    eta, _ = tail_fixed_point(p, mu)
    oracle = dense_newton_tail(p, mu.coeffs)
    diff = SpaceTimeField(p.basis, eta.coeffs - oracle)
    assert diff.h_norm() <= 1e-8


def test_tail_contraction_ratio_bound():
    case = nl.scaled_sine(0.1)
    p = static_problem(L_PI, case, cutoff=2, k_max=16)
    mu = _core_field(p, [1.0, 0.5])
    _, log = tail_fixed_point(p, mu)
    bound = case.lipschitz / p.basis.lam[p.cutoff] + 0.05
    assert log.ratios, "expected a nontrivial iteration"
    assert max(log.ratios[1:], default=0.0) <= bound
    assert log.observed_ratio <= bound


def test_tail_requires_core_support():
    p = static_problem(L_PI, nl.zero(), cutoff=2, k_max=16)
    bad = np.zeros(16)
    bad[10] = 1.0
    with pytest.raises(DomainError):
        tail_fixed_point(p, SpaceTimeField(p.basis, bad))


def test_tail_noncontraction_diagnostic():
    # Lipschitz constant far above the tail floor: construction must be
    # forced, and the iteration reports its failure to contract
    case = nl.scaled_sine(30.0)
    p = static_problem(L_PI, case, cutoff=1, k_max=8, force=True)
    assert p.contraction_ratio > 1.0
    mu = _core_field(p, [1.0])
    with pytest.raises(NonContractionError) as err:
        tail_fixed_point(p, mu, max_iter=40)
    assert err.value.observed_ratio is not None


# ------------------------------------------------------ bifurcation residual

def test_bifurcation_residual_zero_cases():
    p = static_problem(L_PI, nl.zero(), cutoff=2, k_max=16)
    mu0 = p.zero_field()
    eta, _ = tail_fixed_point(p, mu0)
    assert bifurcation_residual(p, mu0, eta).h_norm() == 0.0
    mu = _core_field(p, [2.0, -1.0])
    resid = bifurcation_residual(p, mu, eta)
    np.testing.assert_array_equal(resid.coeffs, mu.coeffs)


def test_bifurcation_residual_at_solution():
    p = static_problem(L_PI, _table_nl(), cutoff=2, k_max=16)
    res = solve_static_reduced(p)
    resid = bifurcation_residual(p, res.mu, res.eta)
    assert resid.h_norm() <= 1e-10


# ----------------------------------------------------------- static solves

def test_solve_static_zero():
    p = static_problem(L_PI, nl.zero(), cutoff=2, k_max=16)
    res = solve_static_reduced(p)
    assert res.mu.h_norm() == 0.0
    assert res.eta.h_norm() == 0.0
    assert res.weak_residual == 0.0


def test_solve_static_constant_source_analytic():
    p = static_problem(L_PI, nl.constant(1.0), k_max=1024)
    res = solve_static_reduced(p)
    x = np.linspace(0.0, math.pi, 512)
    values, report = reconstruct_full_solution(res, x)
    exact = x * (math.pi - x) / 2.0
    assert np.max(np.abs(values - exact)) <= 1e-6
    assert report.norm <= 1e-9


@pytest.mark.parametrize("case_factory", [lambda: nl.scaled_sine(0.1), _table_nl],
                         ids=["scaled-sine", "table-spline"])
def test_solve_static_matches_dense_newton(case_factory):
    case = case_factory()
    p = static_problem(L_PI, case, cutoff=2, k_max=16)
    res = solve_static_reduced(p)
    v_dense = dense_newton_solve(p)
    u_reduced = res.solution_field()
    u_dense = apply_inverse_operator(SpaceTimeField(p.basis, v_dense), p.symbol)
    assert (u_reduced - u_dense).h_norm() <= 1e-8


# ------------------------------------------------------------- wave solves

def test_solve_wave_zero_unique():
    p = wave_problem(WAVE_GEO, nl.zero(), cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p)
    assert res.mu.h_norm() == 0.0
    assert res.eta.h_norm() == 0.0


def test_solve_wave_constant_linear():
    c = 0.05
    p = wave_problem(WAVE_GEO, nl.constant(c), cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p)
    source = apply_nemitski(nl.constant(c), p.zero_field(), p.resolution)
    expected = source.coeffs / p.basis.sigma
    got = (res.mu + res.eta).coeffs
    assert np.max(np.abs(got - expected)) <= 1e-12
    # source is constant in x: only the k = 0 channel is populated
    assert np.max(np.abs(got[:, 1:])) == 0.0


@pytest.mark.parametrize("case_factory", [lambda: nl.scaled_sine(0.1), _table_nl],
                         ids=["scaled-sine", "table-spline"])
def test_solve_wave_matches_dense_newton(case_factory):
    case = case_factory()
    p = wave_problem(WAVE_GEO, case, cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p)
    u_dense = dense_newton_solve(p)
    diff = SpaceTimeField(p.basis, (res.mu + res.eta).coeffs - u_dense)
    assert diff.h_norm() <= 1e-8


def test_solve_static_solver_error_contract():
    p = static_problem(L_PI, _table_nl(), cutoff=2, k_max=16)
    with pytest.raises(SolverError):
        solve_static_reduced(p, max_newton=0)


# ----------------------------------------------------------- reduced system

def test_reduced_rhs_phi_zero():
    p = wave_problem(WAVE_GEO, nl.zero(), cutoff=1, k_max=8, j_max=6)
    res = solve_wave_reduced(p)
    rhs = reduced_rhs_phi(p, res.mu, res.eta, np.linspace(0, 1, 11))
    assert np.max(np.abs(rhs["phi"])) == 0.0


def test_reduced_rhs_phi_constant_structure():
    c = 0.3
    p = wave_problem(WAVE_GEO, nl.constant(c), cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p)
    t = np.linspace(0.0, 1.0, 21)
    rhs = reduced_rhs_phi(p, res.mu, res.eta, t)
    labels = rhs["channels"]
    # all the source sits in the constant spatial channel
    for lab, prof in zip(labels, rhs["phi"]):
        if lab != "k0":
            assert np.max(np.abs(prof)) == 0.0
    k0 = rhs["phi"][labels.index("k0")]
    # truncated time-sine expansion of the constant c on (0, T)
    j = np.arange(1, p.modes.j_max + 1)
    coeffs = np.where(j % 2 == 1, 4.0 * c / (np.pi * j), 0.0)
    expected = np.sin(np.outer(j * math.pi, t)).T @ coeffs
    np.testing.assert_allclose(k0, expected, atol=1e-4)


def test_reduced_rhs_phi_ode_consistency():
    p = wave_problem(WAVE_GEO, _table_nl(), cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p)
    t = np.linspace(0.05, 0.95, 19)
    rhs = reduced_rhs_phi(p, res.mu, res.eta, t)
    basis = p.basis
    core_ch = [s for s in range(basis.n_spatial)
               if basis.k_of_channel[s] <= p.cutoff]
    time_table = np.sin(np.outer(basis.nu, t))
    for row, s in enumerate(core_ch):
        # spectral  mu_s'' + omega^2 mu_s  =  sum_j sigma[j, s] mu[j, s] sin(...)
        lhs = (res.mu.coeffs[:, s] * basis.sigma[:, s]) @ time_table
        assert np.max(np.abs(lhs - rhs["phi"][row])) <= 1e-6


# ------------------------------------------------------------- functionals

def test_functional_J_zero_field():
    for p in (static_problem(L_PI, nl.scaled_sine(0.1), cutoff=2, k_max=16),
              wave_problem(WAVE_GEO, nl.scaled_sine(0.1), cutoff=1, k_max=8,
                           j_max=6)):
        assert functional_J(p, p.zero_field()) == 0.0


def test_functional_J_wave_single_mode_closed_form():
    p = wave_problem(WAVE_GEO, nl.zero(), cutoff=2, k_max=8, j_max=6)
    basis = p.basis
    rng = np.random.default_rng(23)
    for (j, s) in [(1, 0), (2, 3), (4, 6)]:
        c = float(rng.uniform(0.5, 2.0))
        coeffs = basis.zeros()
        coeffs[j - 1, s] = c
        value = functional_J(p, SpaceTimeField(basis, coeffs))
        nu2 = (j * math.pi / WAVE_GEO.T) ** 2
        omega2 = float(basis.omega[s] ** 2)
        assert value == pytest.approx(0.25 * (nu2 - omega2) * c * c, rel=1e-12)


def test_functional_J_static_first_mode_parseval():
    p = static_problem(L_PI, nl.zero(), cutoff=2, k_max=16)
    coeffs = np.zeros(16)
    coeffs[0] = 1.0
    value = functional_J(p, SpaceTimeField(p.basis, coeffs))
    # Parseval oracle: J = (1/2) * averaged H^1-seminorm weight of mode 1
    assert value == pytest.approx(0.5 * float(p.basis.weight_grad[0]), rel=1e-13)


def test_reduced_action_zero_nonlinearity_pure_harmonic():
    p = wave_problem(WAVE_GEO, nl.zero(), cutoff=1, k_max=8, j_max=6)
    mu = _core_field(p, [0.4, -0.2, 0.3])
    act = functional_I_and_N(p, mu)
    assert np.max(np.abs(act.coupling_profile)) == 0.0
    basis = p.basis
    harmonic = 0.5 * float(np.sum((basis.weight_dt - basis.weight_dx)
                                  * mu.coeffs**2))
    assert act.value == pytest.approx(harmonic, rel=1e-13)


def test_reduced_action_identity_random_mu():
    p = wave_problem(WAVE_GEO, _table_nl(), cutoff=1, k_max=8, j_max=8)
    rng = np.random.default_rng(29)
    core = p.basis.core_mask()
    for _ in range(20):
        coeffs = np.where(core, 0.2 * rng.standard_normal(p.basis.shape), 0.0)
        mu = SpaceTimeField(p.basis, coeffs)
        eta, _ = tail_fixed_point(p, mu)
        act = functional_I_and_N(p, mu, eta=eta)
        direct = functional_J(p, mu + eta)
        assert abs(act.value - direct) <= 1e-10 * max(1.0, abs(direct))


def test_reduced_action_gradient_vanishes_at_solution():
    p = wave_problem(WAVE_GEO, _table_nl(), cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p)
    idx = np.where(p.basis.core_mask().ravel())[0]

    def I_of(vec):
        flat = np.zeros(p.basis.size)
        flat[idx] = vec
        return functional_I_and_N(
            p, SpaceTimeField(p.basis, flat.reshape(p.basis.shape))).value

    grad = fd_gradient(I_of, res.mu.coeffs.ravel()[idx], step=1e-6)
    assert np.linalg.norm(grad) <= 1e-5


def test_variational_equivalence_both_directions():
    tol = 1e-10
    p = wave_problem(WAVE_GEO, _table_nl(), cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p, tol=tol)
    idx = np.where(p.basis.core_mask().ravel())[0]

    def I_of(vec):
        flat = np.zeros(p.basis.size)
        flat[idx] = vec
        return functional_I_and_N(
            p, SpaceTimeField(p.basis, flat.reshape(p.basis.shape))).value

    # solved point: residual small  =>  gradient small
    resid = bifurcation_residual(p, res.mu, res.eta)
    assert resid.h_norm() <= tol
    grad = fd_gradient(I_of, res.mu.coeffs.ravel()[idx], step=1e-6)
    assert np.linalg.norm(grad) <= 10 * tol

    # perturbed point: residual large  =>  gradient large
    mu_pert = res.mu.coeffs.copy()
    mu_pert[0, 0] += 0.05
    mu_p = SpaceTimeField(p.basis, mu_pert)
    eta_p, _ = tail_fixed_point(p, mu_p)
    resid_p = bifurcation_residual(p, mu_p, eta_p)
    grad_p = fd_gradient(I_of, mu_pert.ravel()[idx], step=1e-6)
    assert resid_p.h_norm() > 1e-4
    assert np.linalg.norm(grad_p) > 1e-4


def test_static_reduced_action_gradient_matches_residual():
    p = static_problem(L_PI, _table_nl(), cutoff=2, k_max=16)
    res = solve_static_reduced(p)
    idx = np.where(p.basis.core_mask().ravel())[0]

    def J_tilde(vec):
        flat = np.zeros(p.basis.size)
        flat[idx] = vec
        return reduced_action_static(p, SpaceTimeField(p.basis, flat))

    grad = fd_gradient(J_tilde, res.mu.coeffs.ravel()[idx], step=1e-6)
    assert np.linalg.norm(grad) <= 1e-5


# ------------------------------------------------------------- invariants

def test_core_tail_orthogonality():
    p = wave_problem(WAVE_GEO, _table_nl(), cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p)
    inner = res.mu.h_inner(res.eta)
    scale = max(res.mu.h_norm() * res.eta.h_norm(), 1e-30)
    assert abs(inner) <= 1e-14 * max(1.0, scale)


def test_result_contraction_ratio_invariant():
    for p in (static_problem(L_PI, _table_nl(), cutoff=2, k_max=16),
              wave_problem(WAVE_GEO, _table_nl(), cutoff=1, k_max=8, j_max=8)):
        res = (solve_static_reduced(p) if p.kind == "static"
               else solve_wave_reduced(p))
        assert res.contraction_ratio_observed <= p.contraction_ratio + 0.05
        assert res.residual_tail <= 1e-12


def test_reconstruct_zero_static():
    p = static_problem(L_PI, nl.zero(), cutoff=2, k_max=16)
    res = solve_static_reduced(p)
    values, _ = reconstruct_full_solution(res, np.linspace(0, math.pi, 64))
    assert np.max(np.abs(values)) == 0.0


def test_reconstruct_matches_dense_pointwise():
    case = _table_nl()
    p = static_problem(L_PI, case, cutoff=2, k_max=16)
    res = solve_static_reduced(p)
    x = np.linspace(0.0, math.pi, 200)
    values, _ = reconstruct_full_solution(res, x)
    v_dense = dense_newton_solve(p)
    u_dense = apply_inverse_operator(SpaceTimeField(p.basis, v_dense), p.symbol)
    dense_vals = p.basis.evaluate(u_dense.coeffs, x)
    assert np.max(np.abs(values - dense_vals)) <= 1e-6


def test_wave_profiles_vanish_at_boundaries():
    p = wave_problem(WAVE_GEO, _table_nl(), cutoff=1, k_max=8, j_max=8)
    res = solve_wave_reduced(p)
    _, _, prof = mu_time_profiles(p, res.mu, [0.0, WAVE_GEO.T])
    assert np.max(np.abs(prof)) <= 1e-12


def test_forward_map_composition_order():
    # static: F(g(v)); wave: g(F(u)) — check against explicit composition
    case = nl.scaled_sine(0.1)
    ps = static_problem(L_PI, case, cutoff=2, k_max=16)
    rng = np.random.default_rng(31)
    fld = SpaceTimeField(ps.basis, 0.1 * rng.standard_normal(16))
    lifted = apply_inverse_operator(fld, ps.symbol)
    expected = apply_nemitski(case, lifted, ps.resolution)
    np.testing.assert_allclose(forward_map(ps, fld).coeffs, expected.coeffs,
                               atol=1e-15)
    pw = wave_problem(WAVE_GEO, case, cutoff=1, k_max=8, j_max=6)
    fldw = SpaceTimeField(pw.basis, 0.1 * rng.standard_normal(pw.basis.shape))
    imw = apply_nemitski(case, fldw, pw.resolution)
    expected_w = apply_inverse_operator(imw, pw.symbol)
    np.testing.assert_allclose(forward_map(pw, fldw).coeffs, expected_w.coeffs,
                               atol=1e-15)
