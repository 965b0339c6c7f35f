import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublinrobin.domain_grid import (
    build_domain,
    integrate_boundary,
    integrate_volume,
    make_weight,
    read_weight_csv,
    weight_from_values,
)
from sublinrobin.errors import ConfigError


@pytest.mark.parametrize(
    "kind,size,dim,m,expected",
    [
        ("interval", 2.0, 1, 256, 2.0),
        ("radial", 1.0, 2, 256, 2 * math.pi),
        ("radial", 2.0, 3, 128, 16 * math.pi),
    ],
)
def test_boundary_measure(kind, size, dim, m, expected):
    d = build_domain(kind, size, dim, m)
    assert d.boundary_measure == pytest.approx(expected, rel=1e-14)
    assert integrate_boundary(1.0, d) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize(
    "args,msg",
    [
        (("square", 1.0, 1, 64), "kind"),
        (("interval", -1.0, 1, 64), "size"),
        (("interval", 1.0, 1, 4), "resolution"),
        (("interval", 1.0, 2, 64), "one-dimensional"),
        (("radial", 1.0, 0, 64), "dimension"),
    ],
)
def test_build_domain_rejects(args, msg):
    with pytest.raises(ConfigError, match=msg):
        build_domain(*args)


def test_volume_quadrature():
    d = build_domain("interval", 2.0, 1, 256)
    assert integrate_volume(1.0, d) == pytest.approx(2.0, rel=1e-14)
    d1 = build_domain("interval", 1.0, 1, 256)
    assert integrate_volume(d1.nodes, d1) == pytest.approx(0.5, abs=1e-10)
    disc = build_domain("radial", 1.0, 2, 256)
    assert integrate_volume(1.0, disc) == pytest.approx(math.pi, abs=1e-6)
    assert integrate_volume(3.0, disc) == pytest.approx(3 * math.pi, abs=1e-6)


def test_boundary_quadrature():
    d = build_domain("interval", 2.0, 1, 64)
    assert integrate_boundary(d.nodes, d) == pytest.approx(2.0)
    disc = build_domain("radial", 1.0, 2, 64)
    assert integrate_boundary(3.0, disc) == pytest.approx(6 * math.pi)


def test_field_shape_checked():
    d = build_domain("interval", 2.0, 1, 64)
    with pytest.raises(ValueError):
        integrate_volume(np.ones(10), d)


def test_cos_shift_stats(dom, canon):
    s = canon.stats
    assert s.integral == pytest.approx(-0.5, abs=1e-12)
    assert s.sign_changing and s.a0_holds
    assert s.integral_pos - s.integral_neg == pytest.approx(s.integral, abs=1e-14)
    # a > 0 near both ends of (0, 2) and around x = 2 only: two components touching the boundary
    assert len(s.positivity_components) == 2


def test_c_a_refinement_oracle():
    # second-order quadrature of the kinked a⁺: m=256 vs the 4x grid differ by about 1e-5
    vals = {}
    for m in (256, 1024, 4096):
        d = build_domain("interval", 2.0, 1, m)
        vals[m] = make_weight("cos_shift", {"delta": 0.25}, d).stats.c_a
    assert abs(vals[256] / vals[1024] - 1) <= 2e-5
    err_coarse = abs(vals[256] - vals[4096])
    err_fine = abs(vals[1024] - vals[4096])
    assert err_coarse / err_fine >= 16.0  # at least second order between the two refinements


def test_k_split_identity(dom, canon):
    same = make_weight("k_split", {"k": 1.0, "base": canon}, dom)
    np.testing.assert_array_equal(same.values, canon.values)
    nested = make_weight("k_split", {"k": 2.0, "base": {"preset": "cos_shift", "params": {"delta": 0.25}}}, dom)
    assert nested.stats.integral_pos == pytest.approx(2 * canon.stats.integral_pos)
    assert nested.stats.integral_neg == pytest.approx(canon.stats.integral_neg)


def test_radial_annulus_components():
    d = build_domain("radial", 1.0, 2, 256)
    w = make_weight("radial_annulus", {"R0": 0.5, "inner_level": -1.0, "outer_level": 0.5}, d)
    assert w.stats.sign_changing
    assert len(w.stats.positivity_components) == 1


def test_constant_negative_not_sign_changing(dom):
    w = make_weight("constant", {"value": -1.0}, dom)
    assert not w.stats.sign_changing
    assert w.stats.c_a is None


def test_tabulated_csv(tmp_path, dom):
    path = tmp_path / "a.csv"
    xs = np.linspace(0, 2, 41)
    lines = ["x,a"] + [f"{x},{np.cos(np.pi * x) - 0.25}" for x in xs]
    path.write_text("\n".join(lines))
    x, y = read_weight_csv(path)
    assert len(x) == 41
    w = make_weight("tabulated", {"path": str(path)}, dom)
    exact = np.cos(np.pi * dom.nodes) - 0.25
    assert np.max(np.abs(w.values - exact)) < 0.01


def test_tabulated_must_cover(dom):
    with pytest.raises(ConfigError, match="cover"):
        make_weight("tabulated", {"x": [0.0, 1.0], "a": [1.0, -1.0]}, dom)


def test_unknown_preset(dom):
    with pytest.raises(ConfigError):
        make_weight("nope", {}, dom)


def test_nonfinite_weight(dom):
    vals = np.zeros(dom.n_nodes)
    vals[3] = np.nan
    with pytest.raises(ConfigError):
        weight_from_values(vals, dom)


def test_refined_domain(dom):
    fine = dom.refined(4)
    assert fine.m == 4 * dom.m
    assert fine.volume == pytest.approx(dom.volume)


@settings(max_examples=30, deadline=None)
@given(
    dim=st.integers(1, 4),
    radius=st.floats(0.3, 3.0),
    m=st.integers(16, 200),
)
def test_radial_quadrature_exact_for_constants(dim, radius, m):
    d = build_domain("radial", radius, dim, m)
    omega = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    assert integrate_volume(1.0, d) == pytest.approx(omega * radius**dim, rel=1e-12)
    assert d.boundary_measure == pytest.approx(dim * omega * radius ** (dim - 1), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(k=st.floats(0.1, 5.0), delta=st.floats(-0.5, 0.9))
def test_k_split_preserves_sign_pattern(k, delta):
    d = build_domain("interval", 2.0, 1, 64)
    base = make_weight("cos_shift", {"delta": delta}, d)
    w = make_weight("k_split", {"k": k, "base": base}, d)
    np.testing.assert_array_equal(np.sign(w.values), np.sign(base.values))
    assert w.stats.positivity_components == base.stats.positivity_components
