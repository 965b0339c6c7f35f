"""
The two-branch solution curve and its fold
==========================================

Starting from the Neumann solution u_N at α = 0 the lower (stable) branch is
followed in α until γ₁, the smallest eigenvalue of the linearization, gets
small. Pseudo-arclength continuation then turns the fold, and the upper
(unstable) branch is followed back towards α → 0⁺, where it blows up like
α^{-1/(1-q)}·c_a.

Writes branch.csv, fold.json and diagram.svg into demos/out/.
"""

from pathlib import Path

from sublinrobin import continuation as ct
from sublinrobin.domain_grid import build_domain, make_weight
from sublinrobin.elliptic import ProblemSpec
from sublinrobin.report import branch_csv, dumps, render_diagram, write_atomic

dom = build_domain("interval", 2.0, 1, 256)
a = make_weight("cos_shift", {"delta": 0.25}, dom)
spec = ProblemSpec("P", 0.9, a, dom)

branch = ct.trace_branch(spec)
fold = branch.fold
print(f"{len(branch.points)} points, stopped because: {branch.reason}")
print(f"fold at α_s = {fold.alpha_s:.6f}, β'' = {fold.beta_second:.3e}, bends left: {fold.bend_left}")
print(f"γ₁ at the fold = {fold.gamma1:.1e}")

# the fold can never pass the flux bound, which in turn is compared with α₂ (it fails here)
bound = ct.alpha_s_upper_bound(a, 0.9, dom)
print(f"flux bound -∫a / ∫_∂Ω u_N^(1-q) = {bound:.4f}")

asym = ct.upper_branch_asymptote(branch, 0.9, a, dom)
print(f"α^(1/(1-q)) ‖u‖∞ at α = {asym['alpha_min']:.0e}: rel. error to c_a {asym['rel_err_at_min_alpha']:.3%}")

out = Path(__file__).parent / "out"
write_atomic(out / "branch.csv", branch_csv(branch))
write_atomic(out / "fold.json", dumps(fold.as_dict()))
render_diagram([branch], [fold], out / "diagram.svg", title="q = 0.9")
print("wrote", sorted(p.name for p in out.iterdir()))
