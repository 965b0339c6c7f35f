"""
The limit q → 1⁻
================

At a fixed α below β₀ the two solutions, scaled by λ±^{1/(1-q)}, approach
t± φ± built from the principal eigenfunctions, and the fold location α_s(q)
approaches β₀.
"""

from sublinrobin import continuation as ct
from sublinrobin import spectral as sp
from sublinrobin.domain_grid import build_domain, make_weight

dom = build_domain("interval", 2.0, 1, 256)
a = make_weight("cos_shift", {"delta": 0.25}, dom)
alpha = 0.5 * sp.beta0(a, dom)

res = ct.q_sweep(a, alpha, [0.9, 0.95, 0.99], dom)
print(f"α = {alpha:.5f}, β₀ = {res['beta0']:.6f}, λ₋ = {res['lambda_minus']:.4f}, λ₊ = {res['lambda_plus']:.4f}")
print(f"lower solution: {res['trichotomy']}")
for r in res["records"]:
    print(f"q = {r['q']:.2f}: e₁ = {r['e1']:.2e}, e₂ = {r['e2']:.2e}, α_s = {r['alpha_s']:.6f}, |α_s - β₀| = {r['gap_to_beta0']:.2e}")
print("all decreasing:", res["e1_decreasing"] and res["e2_decreasing"] and res["gap_decreasing"])
