"""
Parameter thresholds of the canonical problem
=============================================

The interval (0, 2) with the weight a(x) = cos(πx) - 0.25. Three numbers
organise everything that follows:

* α₂, the first nontrivial Steklov value, which caps the fold location;
* β₀, the largest Robin parameter for which the weighted eigenvalue problem
  still has two principal eigenvalues λ₋ < λ₊;
* σ₁ᴺ and t*, which fix the size of u_N when q is close to 1.
"""

import numpy as np

from sublinrobin import spectral as sp
from sublinrobin.domain_grid import build_domain, make_weight

dom = build_domain("interval", 2.0, 1, 256)
a = make_weight("cos_shift", {"delta": 0.25}, dom)
print("∫a =", a.stats.integral, " sign changing:", a.stats.sign_changing)

# Steklov: the interval is the unit 1-ball, so α₂ = 1; on a disc of radius 2 it is 1/2
print("α₂ (interval)      =", sp.alpha2(dom))
print("α₂ (disc, R = 2)   =", sp.alpha2(build_domain("radial", 2.0, 2, 256)))
print("Neumann α̃₂        =", sp.neumann_alpha2(dom), " (π/2)² =", (np.pi / 2) ** 2)

# β₀ by two independent routes: the peak of α ↦ max_λ μ₁ and the dual Schur-complement problem
b = sp.beta0(a, dom, detail=True)
print(f"β₀ = {b.value:.9f}  (peak route {b.peak_route:.9f}, dual route {b.dual_route:.9f})")

# below β₀ the two principal eigenvalues bracket the peak of the concave map λ ↦ μ₁
for frac in (0.0, 0.5, 0.9, 0.999):
    pair = sp.principal_weighted(a, frac * b.value, dom)
    print(f"α = {frac:5.3f}·β₀: λ₋ = {pair.lam_minus:.5f}, λ₊ = {pair.lam_plus:.5f}")

sigma, _ = sp.sigma1_neumann(a, dom)
print("σ₁ᴺ(a) =", sigma, " t* =", sp.t_star(a, dom))
