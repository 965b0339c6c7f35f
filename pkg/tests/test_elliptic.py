import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublinrobin import continuation as ct
from sublinrobin.domain_grid import build_domain, make_weight
from sublinrobin.elliptic import (
    ProblemSpec,
    apply_K_boundary,
    apply_K_Omega,
    assemble,
    d_residual_d_alpha,
    divergence_identity_gap,
    fixed_point_map,
    flux_scale,
    jacobian,
    p_to_r,
    r_to_p,
    residual,
    residual_scale,
    solve_linear,
)
from sublinrobin.errors import ConfigError, PositivityGuardError, SingularOperatorError


def test_neumann_kernel(dom):
    op = assemble(dom, 0.0, "neumann")
    assert np.max(np.abs(op.matvec(np.ones(dom.n_nodes)))) <= 1e-10


def test_robin_zero_is_neumann(dom):
    a = assemble(dom, 0.0, "robin", alpha=0.0)
    b = assemble(dom, 0.0, "neumann")
    np.testing.assert_array_equal(a.diag, b.diag)
    np.testing.assert_array_equal(a.off, b.off)


def test_robin_positive_alpha_indefinite(dom):
    op = assemble(dom, 0.0, "robin", alpha=1.0)
    lam = np.linalg.eigvals(op.dense()).real.min()  # dense nonsymmetric oracle
    assert lam < 0
    d, e = op.symmetric_bands()
    sym = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.linalg.eigvalsh(sym)[0] == pytest.approx(lam, abs=1e-9)


def test_shifted_neumann_constant_rhs(dom):
    u = solve_linear(assemble(dom, 1.0, "neumann"), 1.0)
    np.testing.assert_allclose(u, 1.0, atol=1e-12)


def test_manufactured_linear_second_order():
    errs = []
    for m in (64, 128, 256):
        d = build_domain("interval", 2.0, 1, m)
        x = d.nodes
        k = np.pi / 2
        u_star = np.cos(k * x)
        rhs = (k**2 + 1.0) * u_star
        u = solve_linear(assemble(d, 1.0, "neumann"), rhs)
        errs.append(np.max(np.abs(u - u_star)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_singular_neumann_detected(dom):
    with pytest.raises(SingularOperatorError):
        solve_linear(assemble(dom, 0.0, "neumann"), 1.0)


def test_bad_modes(dom):
    with pytest.raises(ConfigError):
        assemble(dom, 0.0, "dirichlet")
    with pytest.raises(ConfigError):
        assemble(dom, 0.0, "neumann", angular_mode=1)


def test_angular_mode_pins_centre():
    d = build_domain("radial", 1.0, 2, 64)
    op = assemble(d, 0.0, "neumann", angular_mode=1)
    assert op.size == d.n_nodes - 1
    u = op.matvec(np.ones(d.n_nodes))
    assert u[0] == 0.0


def test_K_omega_properties(dom, rng):
    np.testing.assert_allclose(apply_K_Omega(2.0, 2.0, dom), 1.0, atol=1e-12)
    spike = np.zeros(dom.n_nodes)
    spike[100] = 1.0
    assert np.all(apply_K_Omega(1.0, spike, dom) > 0)
    g = rng.standard_normal(dom.n_nodes)
    np.testing.assert_array_equal(apply_K_Omega(1.5, g, dom), solve_linear(assemble(dom, 0.0, "neumann", shift=1.5), g))
    with pytest.raises(ConfigError):
        apply_K_Omega(0.0, g, dom)


def test_K_boundary_properties(dom):
    np.testing.assert_array_equal(apply_K_boundary(1.0, 0.0, dom), 0.0)
    u = apply_K_boundary(1.0, [1.0, 1.0], dom)
    assert np.all(u > 0)
    np.testing.assert_allclose(u, u[::-1], rtol=1e-12)
    # continuous solution cosh(x-1)/sinh(1) with unit outward flux at both ends
    exact = np.cosh(dom.nodes - 1.0) / np.sinh(1.0)
    assert np.max(np.abs(u - exact)) < 1e-4


def test_fixed_point_identity(spec_p, u_n, branch_p):
    c = 3.0
    for alpha, u in [(0.0, u_n), (branch_p.points[5].alpha, branch_p.points[5].u)]:
        fu = fixed_point_map(spec_p, alpha, u, c)
        assert np.max(np.abs(fu - u)) <= 1e-8 * np.max(u)


def test_fixed_point_identity_s(spec_s, branch_s):
    pt = branch_s.points[5]
    fu = fixed_point_map(spec_s, pt.alpha, pt.u, 2.0)
    assert np.max(np.abs(fu - pt.u)) <= 1e-8 * np.max(pt.u)


def test_solution_residual(spec_p, u_n):
    _, sup = residual(spec_p, 0.0, u_n)
    assert sup <= 1e-9 * residual_scale(spec_p, 0.0, u_n)


def test_positivity_guard(spec_p, dom):
    u = np.ones(dom.n_nodes)
    u[7] = -1e-3
    with pytest.raises(PositivityGuardError):
        residual(spec_p, 0.1, u)
    with pytest.raises(PositivityGuardError):
        residual(spec_p, 0.1, np.full(dom.n_nodes, np.nan))


def test_p_r_equivalence(spec_p, branch_p):
    for pt in branch_p.points[1::7]:
        assert ct.rescaling_gap(spec_p, pt.alpha, pt.u) <= 1e-8
        w = p_to_r(pt.alpha, pt.u, 0.9)
        np.testing.assert_allclose(r_to_p(pt.alpha, w, 0.9), pt.u, rtol=1e-14)


def test_uN_flux_balance(spec_p, u_n):
    assert abs(divergence_identity_gap(spec_p, 0.0, u_n)) <= 1e-6 * flux_scale(spec_p, 0.0, u_n)


def test_flux_gap_nonzero_off_solutions(spec_p, dom, canon):
    u = np.full(dom.n_nodes, 2.0)
    gap = divergence_identity_gap(spec_p, 0.3, u)
    expected = canon.stats.integral * 2.0**0.9 + 0.3 * 2 * 2.0
    assert gap == pytest.approx(expected, rel=1e-12)
    assert abs(gap) > 0.1


def _fd_jacobian_check(spec, alpha, u, direction, eps=1e-6):
    jv = jacobian(spec, alpha, u).matvec(direction)
    fp, _ = residual(spec, alpha, u + eps * direction)
    fm, _ = residual(spec, alpha, u - eps * direction)
    fd = (fp - fm) / (2 * eps)
    return np.max(np.abs(jv - fd)) / max(np.max(np.abs(jv)), np.max(np.abs(fd)))


@pytest.mark.parametrize("family", ["P", "S", "R", "RS"])
def test_jacobian_matches_fd(family, dom, canon, rng):
    spec = ProblemSpec(family, 0.7, canon, dom)
    x = dom.nodes
    for _ in range(5):
        u = 1.0 + 0.5 * np.cos(np.pi * x * rng.uniform(0.2, 2)) + rng.uniform(0, 0.2)
        v = rng.standard_normal(dom.n_nodes) * 0.1
        assert _fd_jacobian_check(spec, rng.uniform(0.05, 1.0), u, v) <= 1e-5


@pytest.mark.parametrize("family", ["P", "S", "R", "RS"])
def test_alpha_derivative_matches_fd(family, dom, canon):
    spec = ProblemSpec(family, 0.6, canon, dom)
    u = 1.5 + np.sin(dom.nodes)
    # every family is affine in α, so a large step is exact and avoids cancellation
    alpha, eps = 0.4, 0.1
    fd = (residual(spec, alpha + eps, u)[0] - residual(spec, alpha - eps, u)[0]) / (2 * eps)
    np.testing.assert_allclose(d_residual_d_alpha(spec, alpha, u), fd, atol=1e-9 * np.max(np.abs(fd)))


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    shift=st.floats(0.01, 100.0),
    alpha=st.floats(0.0, 0.5),
)
def test_linear_solve_residual_bound(seed, shift, alpha):
    d = build_domain("interval", 2.0, 1, 128)
    f = np.random.default_rng(seed).standard_normal(d.n_nodes)
    # shift large enough that Robin(α) plus shift stays definite
    op = assemble(d, 0.0, "robin", alpha=alpha, shift=shift + 2 * alpha)
    u = solve_linear(op, f)
    r = op.matvec(u) - f
    bound = 1e-11 * (np.max(np.abs(op.dense())) * np.max(np.abs(u)) + np.max(np.abs(f)))
    assert np.max(np.abs(r)) <= bound


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.1, 50.0), seed=st.integers(0, 2**31 - 1))
def test_K_operators_positive(c, seed):
    d = build_domain("interval", 1.0, 1, 64)
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.0, 1.0, d.n_nodes)
    h = rng.uniform(0.0, 1.0, 2)
    assert np.all(apply_K_Omega(c, g, d) >= 0)
    assert np.all(apply_K_boundary(c, h, d) >= 0)


def test_radial_weight_family_spec():
    d = build_domain("radial", 1.0, 2, 64)
    w = make_weight("radial_annulus", {"R0": 0.5}, d)
    spec = ProblemSpec("P", 0.5, w, d)
    u = 1.0 + d.nodes**2
    assert _fd_jacobian_check(spec, 0.2, u, np.cos(d.nodes)) <= 1e-5


def test_problem_spec_validation(dom, canon):
    with pytest.raises(ConfigError):
        ProblemSpec("Q", 0.5, canon, dom)
    with pytest.raises(ConfigError):
        ProblemSpec("P", 1.0, canon, dom)
    with pytest.raises(ConfigError):
        ProblemSpec("P", 0.5, canon, build_domain("interval", 2.0, 1, 64))
