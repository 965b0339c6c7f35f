"""
The Neumann problem with a linear term
======================================

-Δu = αu + a u^q with ∂_ν u = 0 behaves like the Robin problem, with the
boundary integral replaced by a volume integral and α₂ by the first nonzero
Neumann eigenvalue.
"""

from sublinrobin import continuation as ct
from sublinrobin import spectral as sp
from sublinrobin.domain_grid import build_domain, make_weight
from sublinrobin.elliptic import ProblemSpec

dom = build_domain("interval", 2.0, 1, 256)
a = make_weight("cos_shift", {"delta": 0.25}, dom)
branch = ct.trace_branch(ProblemSpec("S", 0.9, a, dom))
bound = ct.alpha_s_upper_bound(a, 0.9, dom, "S")
print(f"α_s = {branch.fold.alpha_s:.5f} ≤ -∫a/∫u_N^(1-q) = {bound:.5f} ≤ α̃₂ = {sp.neumann_alpha2(dom):.5f}")
asym = ct.upper_branch_asymptote(branch, 0.9, a, dom)
print(f"upper branch: c_a = {asym['c_a']:.4e}, fitted {asym['c_fit']:.4e}")
