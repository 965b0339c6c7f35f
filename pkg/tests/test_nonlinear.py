import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublinrobin import nonlinear as nl
from sublinrobin import spectral as sp
from sublinrobin.domain_grid import build_domain, make_weight
from sublinrobin.elliptic import (
    ProblemSpec,
    divergence_identity_gap,
    fixed_point_map,
    flux_scale,
    residual,
    residual_scale,
    rounding_floor,
)
from sublinrobin.errors import ConfigError, LeftConeError, SolverError

from mms import mms_errors, mms_profile


def test_newton_exact_start(spec_p, u_n):
    rep = nl.newton_solve(spec_p, 0.0, u_n)
    assert rep.iterations <= 1
    assert rep.final_residual <= rep.tolerance


def test_newton_manufactured_second_order():
    errs = mms_errors()
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 1.8), orders


def test_newton_quadratic_history():
    d = build_domain("interval", 2.0, 1, 128)
    u_star, minus_lap, alpha = mms_profile(d.nodes)
    w = make_weight("tabulated", {"x": d.nodes, "a": minus_lap / u_star**0.5}, d)
    spec = ProblemSpec("P", 0.5, w, d)
    rep = nl.newton_solve(spec, alpha, 0.8 * u_star, tol=1e-13)
    h = np.array(rep.history)
    assert h[-1] < 1e-10 * h[0]
    # near the root r_{k+1} / r_k² stays bounded until rounding takes over
    floor = rounding_floor(spec, alpha, u_star)
    ratios = [h[k + 1] / h[k] ** 2 for k in range(len(h) - 1) if h[k] < 1e-2 and h[k + 1] > floor]
    assert ratios and max(ratios) < 1e3


def test_manufactured_problem_roundtrip(dom):
    x = dom.nodes
    u_star = 2.0 + np.cos(np.pi * x / 2)
    w, alpha = nl.manufactured_problem(u_star, 0.7, None, dom)
    assert alpha == 0.0
    assert w.stats.sign_changing
    spec = ProblemSpec("P", 0.7, w, dom)
    assert residual(spec, alpha, u_star)[1] <= 1e-12 * residual_scale(spec, alpha, u_star)
    u = nl.newton_solve(spec, alpha, u_star * (1 + 0.1 * np.sin(x)), tol=1e-13).solution
    assert np.max(np.abs(u - u_star)) <= 1e-9


def test_manufactured_constant(dom):
    w, alpha = nl.manufactured_problem(np.ones(dom.n_nodes), 0.5, None, dom)
    assert alpha == 0.0
    assert np.max(np.abs(w.values)) <= 1e-8


def test_manufactured_rejects_incompatible_ends(dom):
    with pytest.raises(ConfigError, match="incompatible"):
        nl.manufactured_problem(2.0 + dom.nodes, 0.5, None, dom)


def test_newton_rejects_nonpositive_start(spec_p, dom):
    u = np.ones(dom.n_nodes)
    u[3] = 0.0
    with pytest.raises(LeftConeError):
        nl.newton_solve(spec_p, 0.1, u)


def test_monotone_fixed_point_immediately(spec_p, u_n):
    rep = nl.monotone_iterate(spec_p, 0.0, u_n, u_n)
    assert rep.iterations <= 2
    np.testing.assert_allclose(rep.solution, u_n, rtol=1e-10)


def test_monotone_matches_newton(spec_p, u_n):
    v, w = nl.order_pair(spec_p, 0.0, u_n)
    assert np.all(v <= u_n) and np.all(u_n <= w)
    rep = nl.monotone_iterate(spec_p, 0.0, v, w, tol=1e-12)
    assert np.max(np.abs(rep.solution - u_n)) <= 1e-8 * np.max(u_n)


def test_monotone_iterates_increase(spec_p, branch_p):
    pt = branch_p.labelled("lower")[3]
    v, w = nl.order_pair(spec_p, pt.alpha, pt.u)
    c = nl.monotone_shift(spec_p, pt.alpha, float(np.min(v)))
    u = v
    for _ in range(50):
        nxt = fixed_point_map(spec_p, pt.alpha, u, c)
        assert np.all(nxt >= u - 1e-12 * np.max(w))
        u = nxt


def test_monotone_rejects_unordered(spec_p, u_n):
    with pytest.raises(ConfigError):
        nl.monotone_iterate(spec_p, 0.0, 2 * u_n, u_n)


def test_uN_canonical(spec_p, dom, canon):
    rep = nl.solve_uN(canon, 0.9, dom, check_uniqueness=True)
    u = rep.solution
    assert np.all(u > 0)
    assert abs(divergence_identity_gap(spec_p, 0.0, u)) <= 1e-6 * flux_scale(spec_p, 0.0, u)
    assert rep.info["multistart"]["unique"]


def test_uN_scaling_law(dom, canon, u_n):
    u2 = nl.solve_uN(canon.scaled(2.0, dom), 0.9, dom).solution
    assert np.max(np.abs(u2 - 2.0**10 * u_n)) <= 1e-6 * np.max(u2)


def test_uN_needs_negative_mean(dom):
    with pytest.raises(ConfigError):
        nl.solve_uN(make_weight("cos_shift", {"delta": -0.1}, dom), 0.5, dom)


def test_uN_q_to_one_trend(dom, canon):
    sigma, phi = sp.sigma1_neumann(canon, dom)
    ts = sp.t_star(canon, dom)
    errs = []
    for q in (0.9, 0.95, 0.99):
        u = nl.solve_uN(canon, q, dom).solution
        errs.append(np.max(np.abs(sigma ** (1 / (1 - q)) * u - ts * phi)))
    assert errs[0] > errs[1] > errs[2]


def test_classify():
    assert nl.classify_solution(np.ones(5))["in_P°"]
    assert nl.classify_solution(np.zeros(5))["trivial"]


def test_classify_bump_on_positive_set(dom, canon):
    comps = canon.stats.positivity_components
    u = np.zeros(dom.n_nodes)
    for i, j in comps:
        u[i : j + 1] = 1.0
    c = nl.classify_solution(u, canon)
    assert c["positive_on_Ω₊"] and not c["in_P°"]


def test_solver_error_info():
    err = SolverError("x", alpha=0.1)
    assert err.info == {"alpha": 0.1}


@settings(max_examples=10, deadline=None)
@given(q=st.floats(0.3, 0.95), c=st.floats(0.25, 4.0))
def test_uN_scaling_property(q, c):
    d = build_domain("interval", 2.0, 1, 64)
    a = make_weight("cos_shift", {"delta": 0.25}, d)
    u1 = nl.solve_uN(a, q, d).solution
    u2 = nl.solve_uN(a.scaled(c, d), q, d).solution
    assert np.max(np.abs(u2 - c ** (1 / (1 - q)) * u1)) <= 1e-6 * np.max(u2)
