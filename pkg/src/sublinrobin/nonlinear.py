"""Nonlinear solvers for positive solutions.

Newton's method works on the nodal residual of a problem family (see
:mod:`elliptic`). Tolerances are relative to :func:`elliptic.residual_scale`
because the solutions of interest span many orders of magnitude: u_N is of
size σ₁ᴺ(a)^{-1/(1-q)} and the upper branch grows like α^{-1/(1-q)}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain_grid import Domain, Weight, integrate_volume, weight_from_values
from .elliptic import (
    ProblemSpec,
    assemble,
    check_positive,
    divergence_identity_gap,
    fixed_point_map,
    flux_scale,
    jacobian,
    residual,
    residual_scale,
    rounding_floor,
    solve_linear,
)
from .errors import (
    ConfigError,
    FoldProximityError,
    LeftConeError,
    NoConvergenceError,
    PositivityGuardError,
    SingularOperatorError,
    SolverError,
)
from . import spectral

MAX_HALVINGS = 30
FLUX_TOL = 1e-6


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    final_residual: float
    method: str  # "newton" | "monotone" | "homotopy"
    guard_events: int = 0
    tolerance: float = 0.0
    history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "tolerance": self.tolerance,
            "method": self.method,
            "guard_events": self.guard_events,
            "history": list(self.history),
            "info": self.info,
            "solution": [float(v) for v in self.solution],
        }


def newton_tolerance(spec: ProblemSpec, alpha: float, u, tol: float) -> float:
    """tol relative to the equation's scale, never below the rounding floor."""
    return max(tol * residual_scale(spec, alpha, u), rounding_floor(spec, alpha, u))


def _safe_residual(spec, alpha, u):
    try:
        return residual(spec, alpha, u)[1]
    except PositivityGuardError:
        return None


def newton_solve(spec: ProblemSpec, alpha: float, u0, tol: float = 1e-10, max_iter: int = 50) -> SolveReport:
    """Damped Newton iteration for the family's residual.

    Each step solves ``J δ = -F(u)`` and halves the step (at most 30 times)
    until the sup-residual decreases and the iterate stays strictly positive.
    """
    u = np.array(u0, dtype=float)
    try:
        r, res = residual(spec, alpha, u)
    except PositivityGuardError as exc:
        raise LeftConeError("initial guess is not strictly positive", **exc.info) from exc
    history = [res]
    guard_events = 0
    for it in range(max_iter + 1):
        target = newton_tolerance(spec, alpha, u, tol)
        if res <= target:
            return SolveReport(u, it, res, "newton", guard_events, target, history)
        if it == max_iter:
            break
        try:
            delta = solve_linear(jacobian(spec, alpha, u), -r)
        except SingularOperatorError as exc:
            raise FoldProximityError("fold proximity: Jacobian singular", alpha=alpha, residual=res) from exc
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u + step * delta
            new = _safe_residual(spec, alpha, trial)
            if new is None:
                guard_events += 1
            elif new < res:
                break
            step *= 0.5
        else:
            if new is None:
                raise LeftConeError("left P°: every damped step violates positivity", alpha=alpha, residual=res)
            # stalled at the rounding level: accept if close enough
            if res <= 100 * target:
                return SolveReport(u, it, res, "newton", guard_events, 100 * target, history)
            raise NoConvergenceError("line search failed", alpha=alpha, residual=res, history=history)
        u = trial
        r, res = residual(spec, alpha, u)
        history.append(res)
    raise NoConvergenceError("no convergence", alpha=alpha, residual=res, history=history)


# --------------------------------------------------------------------------
# monotone iteration


def monotone_shift(spec: ProblemSpec, alpha: float, v_min: float) -> float:
    """c making ξ ↦ c ξ + a ξ^q (times α in rescaled form) increasing for ξ ≥ v_min."""
    s = alpha if spec.family in ("R", "RS") else 1.0
    return 1.0 + max(0.0, float(np.max(s * spec.q * np.abs(spec.a))) * v_min ** (spec.q - 1.0))


def monotone_iterate(
    spec: ProblemSpec,
    alpha: float,
    v_sub,
    w_super,
    c: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 200_000,
) -> SolveReport:
    """u_{n+1} = F_c(u_n) from u_0 = v_sub.

    Stops when the a-posteriori distance to the limit, ``ρ/(1-ρ)·|u_{n+1}-u_n|``
    with ρ the observed contraction ratio, is below ``tol`` relative to ‖u‖.
    """
    v = np.array(v_sub, dtype=float)
    w = np.asarray(w_super, dtype=float)
    check_positive(v)
    check_positive(w)
    if np.any(v > w):
        raise ConfigError("sub-solution exceeds super-solution")
    if c is None:
        c = monotone_shift(spec, alpha, float(np.min(v)))
    scale = float(np.max(w))
    slack = 1e-12 * scale
    u = v
    prev_step = None
    history = []
    for it in range(1, max_iter + 1):
        nxt = fixed_point_map(spec, alpha, u, c)
        diff = nxt - u
        if np.any(diff < -slack):
            raise SolverError("monotone iteration decreased", iteration=it, drop=float(np.min(diff)))
        if np.any(nxt > w + slack) or np.any(nxt < v - slack):
            raise SolverError("iterate escaped the order interval", iteration=it)
        step = float(np.max(np.abs(diff)))
        history.append(step)
        u = nxt
        rho = step / prev_step if prev_step else 0.0
        prev_step = step
        if step == 0.0:
            break
        if rho < 1.0 and step * max(rho, 1e-3) / (1.0 - rho) <= tol * float(np.max(u)):
            break
    else:
        raise NoConvergenceError("monotone iteration did not converge", iterations=max_iter, step=step)
    res = residual(spec, alpha, u)[1]
    return SolveReport(u, it, res, "monotone", 0, tol, history[-20:], {"c": c})


def order_pair(spec: ProblemSpec, alpha: float, u, eps: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Discrete sub- and supersolutions around a stable solution u.

    Solves the equation with a constant forcing ``∓ε·scale`` added; for a
    solution with γ₁ > 0 these bracket u. The residual signs are verified.
    """
    scale = eps * residual_scale(spec, alpha, u)
    out = []
    for sign in (-1.0, 1.0):
        shifted = _ForcedSpec(spec, sign * scale)
        z = shifted.solve(alpha, u)
        r = residual(spec, alpha, z)[0]
        if sign < 0 and np.any(r > 0) or sign > 0 and np.any(r < 0):
            raise SolverError("order pair construction failed: residual sign")
        out.append(z)
    v, w = out
    if np.any(v > w):
        raise SolverError("order pair is not ordered")
    return v, w


class _ForcedSpec:
    """Newton for F(u) = f, f constant, reusing the family's residual."""

    def __init__(self, spec: ProblemSpec, forcing: float):
        self.spec = spec
        self.f = forcing

    def solve(self, alpha, u0, tol=1e-13, max_iter=50):
        spec = self.spec
        u = np.array(u0, dtype=float)
        for _ in range(max_iter):
            r = residual(spec, alpha, u)[0] - self.f
            if np.max(np.abs(r)) <= tol * abs(self.f) / 1e-3 + rounding_floor(spec, alpha, u):
                return u
            u = u + solve_linear(jacobian(spec, alpha, u), -r)
            check_positive(u)
        raise NoConvergenceError("forced problem did not converge")


# --------------------------------------------------------------------------
# u_N


def _p_spec(a: Weight, q: float, domain: Domain) -> ProblemSpec:
    return ProblemSpec("P", q, a, domain)


def _uN_seed(a: Weight, q: float, domain: Domain) -> np.ndarray:
    sigma, phi = spectral.sigma1_neumann(a, domain)
    t = spectral.t_from_eigenfunction(a, phi, domain)
    return sigma ** (-1.0 / (1.0 - q)) * t * phi


def solve_uN(
    a: Weight,
    q: float,
    domain: Domain,
    q0: float = 0.95,
    max_step: float = 0.05,
    check_uniqueness: bool = False,
    seed: int = 0,
) -> SolveReport:
    """Positive solution of ``-Δu = a u^q``, ``∂_ν u = 0``.

    Newton with a homotopy in q: start at q0 from σ₁ᴺ(a)^{-1/(1-q0)} t* φ₁ and
    walk to the target q in steps of at most ``max_step``.
    """
    if integrate_volume(a.values, domain) >= 0:
        raise ConfigError("u_N needs ∫a < 0")
    if not 0 < q < 1:
        raise ConfigError("q must lie in (0, 1)")
    u = _uN_seed(a, q0, domain)
    qc = q0
    iterations = 0
    try:
        rep = newton_solve(_p_spec(a, qc, domain), 0.0, u)
    except SolverError:
        # seed directly at the target exponent
        qc = q
        rep = newton_solve(_p_spec(a, q, domain), 0.0, _uN_seed(a, q, domain))
    u = rep.solution
    iterations += rep.iterations
    step = max_step
    while abs(qc - q) > 1e-15:
        qn = qc + math.copysign(min(step, abs(q - qc)), q - qc)
        try:
            rep = newton_solve(_p_spec(a, qn, domain), 0.0, _rescaled_guess(a, u, qc, qn, domain))
        except SolverError:
            step *= 0.5
            if step < 1e-3:
                raise NoConvergenceError("u_N not reached", q=q, reached=qc) from None
            continue
        u, qc = rep.solution, qn
        iterations += rep.iterations
    spec = _p_spec(a, q, domain)
    gap = divergence_identity_gap(spec, 0.0, u)
    fscale = flux_scale(spec, 0.0, u)
    if abs(gap) > FLUX_TOL * fscale:
        raise SolverError("u_N flux identity violated", gap=gap, scale=fscale)
    report = SolveReport(u, iterations, rep.final_residual, "homotopy", rep.guard_events, rep.tolerance, rep.history)
    report.info["flux_gap"] = gap
    report.info["flux_scale"] = fscale
    if check_uniqueness:
        report.info["multistart"] = uniqueness_check(spec, 0.0, u, seed=seed)
    return report


def _rescaled_guess(a, u, q_old, q_new, domain):
    """Map a solution for q_old to a guess for q_new.

    ``-Δ(t u) = t^{1-q} a (t u)^q`` shows the profile is nearly q-independent
    while the amplitude follows σ^{-1/(1-q)}; match the amplitude exponent.
    """
    sigma, _ = spectral.sigma1_neumann(a, domain)
    ratio = sigma ** (-1.0 / (1.0 - q_new)) / sigma ** (-1.0 / (1.0 - q_old))
    return u * ratio


def uniqueness_check(spec: ProblemSpec, alpha: float, u, n: int = 5, seed: int = 0, tol: float = 1e-7) -> dict:
    """Newton from ``n`` randomized positive initializers; the converged ones
    must coincide with ``u`` within ``tol`` relative."""
    rng = np.random.default_rng(seed)
    x = spec.domain.nodes / spec.domain.size
    results = []
    for _ in range(n):
        amp = 10 ** rng.uniform(-0.5, 0.5)
        bump = sum(rng.normal(scale=0.3) * np.cos(k * np.pi * x) for k in range(1, 4))
        start = amp * u * np.exp(bump)
        try:
            sol = newton_solve(spec, alpha, start, max_iter=100).solution
        except SolverError:
            results.append(None)
            continue
        results.append(float(np.max(np.abs(sol - u)) / np.max(np.abs(u))))
    converged = [d for d in results if d is not None]
    return {
        "starts": n,
        "converged": len(converged),
        "max_distance": max(converged) if converged else None,
        "unique": all(d <= tol for d in converged),
    }


# --------------------------------------------------------------------------
# classification and manufactured problems


def classify_solution(u, w: Weight | None = None, tau: float = 1e-6) -> dict:
    u = np.asarray(u, dtype=float)
    top = float(np.max(u))
    trivial = top <= 1e-12
    in_p = (not trivial) and float(np.min(u)) > tau * top
    on_plus = False
    if w is not None and not trivial:
        comps = w.stats.positivity_components if w.stats else ()
        on_plus = bool(comps) and all(np.all(u[i : j + 1] > tau * top) for i, j in comps)
    return {"in_P°": bool(in_p), "positive_on_Ω₊": bool(on_plus), "trivial": bool(trivial)}


def _end_slopes(u: np.ndarray, h: float) -> tuple[float, float]:
    """Fourth-order one-sided derivatives at both ends."""
    c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    return float(c @ u[:5]), float(-(c @ u[::-1][:5]))


def manufactured_problem(u_star, q: float, alpha_hint: float | None, domain: Domain, family: str = "P"):
    """(weight, α) for which u_star solves the discrete problem exactly.

    α is the boundary ratio ∂_ν u*/u* (estimated with one-sided differences;
    both interval ends must agree) unless ``alpha_hint`` is given; then
    a := A_α u* / u*^q nodewise.
    """
    u = np.asarray(u_star, dtype=float)
    check_positive(u)
    if family == "S":
        if alpha_hint is None:
            raise ConfigError("family S needs alpha_hint")
        alpha = float(alpha_hint)
        lin = assemble(domain, -alpha, "neumann")
    else:
        if alpha_hint is not None:
            alpha = float(alpha_hint)
        else:
            d0, d1 = _end_slopes(u, domain.h)
            right = d1 / u[-1]
            if domain.kind == "interval":
                left = -d0 / u[0]
                if abs(left - right) > 1e-8:
                    raise ConfigError(f"incompatible boundary ratios at the two ends: {left:.3e} vs {right:.3e}")
                alpha = 0.5 * (left + right)
            else:
                alpha = right
            if abs(alpha) < 1e-8:
                alpha = 0.0
        lin = assemble(domain, 0.0, "robin", alpha=alpha)
    a = lin.matvec(u) / u**q
    weight = weight_from_values(a, domain, preset="manufactured", params={"q": q, "alpha": alpha})
    return weight, alpha
