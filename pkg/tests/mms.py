"""Manufactured nonlinear problem with continuous data, for convergence-order checks."""

import numpy as np

from sublinrobin import nonlinear as nl
from sublinrobin.domain_grid import build_domain, make_weight
from sublinrobin.elliptic import ProblemSpec


def mms_profile(x):
    """cosh(k(x-1)) + c cos(πx) on (0, 2): equal Robin ratios at both ends."""
    k, c = 0.5, 0.5
    u = np.cosh(k * (x - 1)) + c * np.cos(np.pi * x)
    lap = k**2 * np.cosh(k * (x - 1)) - c * np.pi**2 * np.cos(np.pi * x)
    alpha = k * np.sinh(k) / (np.cosh(k) + c)
    return u, -lap, alpha


def mms_errors(q=0.5, ms=(64, 128, 256)):
    errs = []
    for m in ms:
        d = build_domain("interval", 2.0, 1, m)
        u_star, minus_lap, alpha = mms_profile(d.nodes)
        # continuous data: -Δu* = a u*^q, ∂_ν u* = α u*
        w = make_weight("tabulated", {"x": d.nodes, "a": minus_lap / u_star**q}, d)
        spec = ProblemSpec("P", q, w, d)
        u = nl.newton_solve(spec, alpha, 0.8 * u_star).solution
        errs.append(float(np.max(np.abs(u - u_star))))
    return np.array(errs)
