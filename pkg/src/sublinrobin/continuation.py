"""Branch tracing in α, fold location and the checks built on top of it.

A full trace starting from (0, u_N) runs in three phases:

1. natural-parameter continuation in α on the lower branch (problem P or S);
2. pseudo-arclength continuation in (log u, α) once |γ₁| enters the fold
   band or a natural step fails; log variables keep the corrector well scaled
   while u spans many decades. The fold is located by regula falsi on γ₁ and
   sampled symmetrically along its tangent;
3. natural-parameter continuation of the rescaled problem with α decreasing
   geometrically, down to ``alpha_min`` or until u would overflow.

In phase 3 the rescaled unknown stays of order one while u itself grows
like α^{-1/(1-q)}. Stored points always hold the unscaled u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .domain_grid import Domain, Weight, integrate_boundary, integrate_volume
from .elliptic import (
    RESCALED,
    ProblemSpec,
    d_residual_d_alpha,
    divergence_identity_gap,
    flux_scale,
    jacobian,
    p_to_r,
    r_to_p,
    residual,
    residual_scale,
    rounding_floor,
    solve_linear,
)
from .errors import ConfigError, PositivityGuardError, SingularOperatorError, SolverError
from . import nonlinear, spectral

LABELS = ("lower", "upper", "unknown")


@dataclass(eq=False)
class BranchPoint:
    alpha: float
    u: np.ndarray
    gamma1: float
    stability: str
    arclength: float = 0.0
    branch_label: str = "unknown"
    residual: float = 0.0
    flux_gap: float = 0.0
    fold_coordinate: float | None = None  # offset along the fold tangent, fold samples only

    @property
    def u_min(self) -> float:
        return float(np.min(self.u))

    @property
    def u_max(self) -> float:
        return float(np.max(self.u))


@dataclass
class FoldRecord:
    alpha_s: float
    u_fold: np.ndarray
    bend_left: bool
    beta_second: float
    gamma1: float
    dalpha_ds: float
    tangent_ok: bool
    secant_one_signed: bool
    alpha_fit: float
    index: int

    def as_dict(self) -> dict:
        return {
            "alpha_s": self.alpha_s,
            "bend_left": self.bend_left,
            "beta_second": self.beta_second,
            "gamma1": self.gamma1,
            "dalpha_ds": self.dalpha_ds,
            "tangent_ok": self.tangent_ok,
            "secant_one_signed": self.secant_one_signed,
            "alpha_fit": self.alpha_fit,
            "index": self.index,
        }


@dataclass
class Branch:
    points: list
    fold: FoldRecord | None = None
    reason: str = ""
    family: str = "P"
    q: float = 0.5
    info: dict = field(default_factory=dict)

    def labelled(self, label: str) -> list:
        return [p for p in self.points if p.branch_label == label]

    def csv_rows(self) -> list[list]:
        rows = []
        for p in self.points:
            rows.append(
                [p.arclength, p.alpha, p.u_min, p.u_max, float(p.u[-1]), p.gamma1, p.stability, p.branch_label]
            )
        return rows


CSV_COLUMNS = ["arclength", "alpha", "u_min", "u_max", "u_at_boundary", "gamma1", "stability", "branch_label"]


@dataclass
class StepControl:
    dalpha0: float | None = None  # first natural step; default bound/25
    ds0: float = 0.05
    ds_max: float = 0.25
    ds_min: float = 1e-10
    grow: float = 1.3
    easy_iterations: int = 3
    fold_band: float = 1e-3
    fold_tol: float = 1e-8
    fold_delta: float = 5e-3
    alpha_min: float = 1e-3
    dlog_alpha0: float = 0.05
    dlog_alpha_max: float = 0.35
    max_decades: float = 2.5  # per-step growth cap of ‖u‖ on the upper branch
    overflow_log10: float = 250.0
    max_points: int = 600
    newton_tol: float = 1e-10


def _exponent(q: float) -> float:
    return 1.0 / (1.0 - q)


# --------------------------------------------------------------------------
# tracing


class _Tracer:
    def __init__(self, spec: ProblemSpec, ctl: StepControl):
        if spec.family not in RESCALED:
            raise ConfigError("trace_branch works on family P or S")
        self.spec = spec
        self.rspec = spec.with_family(RESCALED[spec.family])
        self.ctl = ctl
        self.p = _exponent(spec.q)
        self.points: list[BranchPoint] = []
        self.raw: list[tuple[float, np.ndarray] | None] = []  # (α, u) of arclength points
        self.rms = math.sqrt(spec.domain.n_nodes)
        self.reason = ""
        self.fold_found = False

    # -- bookkeeping ---------------------------------------------------------

    def make_point(self, alpha, u, label, fold_coordinate=None) -> BranchPoint:
        g = spectral.linearized_gamma1(self.spec, alpha, u).value
        res = residual(self.spec, alpha, u)[1] / residual_scale(self.spec, alpha, u)
        gap = divergence_identity_gap(self.spec, alpha, u) / flux_scale(self.spec, alpha, u)
        return BranchPoint(
            alpha=float(alpha),
            u=np.asarray(u, dtype=float),
            gamma1=float(g),
            stability=spectral.stability_tag(g),
            branch_label=label,
            residual=float(res),
            flux_gap=float(gap),
            fold_coordinate=fold_coordinate,
        )

    def add(self, pt: BranchPoint, y=None):
        self.points.append(pt)
        self.raw.append(None if y is None else self.from_y(y))

    # -- phase 1: natural parameter, unscaled problem -----------------------

    def natural_lower(self, u0: np.ndarray, gamma_ref: float, dalpha: float, dalpha_max: float):
        spec, ctl = self.spec, self.ctl
        alpha, u = 0.0, u0
        easy = 0
        while len(self.points) < ctl.max_points:
            try:
                du = solve_linear(jacobian(spec, alpha, u), -d_residual_d_alpha(spec, alpha, u))
            except SingularOperatorError:
                return
            guess = u + dalpha * du
            try:
                if np.min(guess) <= 0:
                    raise PositivityGuardError("predictor left the cone")
                rep = nonlinear.newton_solve(spec, alpha + dalpha, guess, tol=ctl.newton_tol, max_iter=12)
                pt = self.make_point(alpha + dalpha, rep.solution, "lower")
            except SolverError:
                if not self.points[1:]:
                    dalpha *= 0.5  # need at least one point with α > 0
                    if dalpha < 1e-12:
                        self.reason = "step underflow"
                        return
                    continue
                return  # hand over to arclength
            if pt.gamma1 <= 0:
                if not self.points[1:]:
                    dalpha *= 0.5
                    continue
                return
            self.add(pt)
            alpha, u = pt.alpha, pt.u
            if abs(pt.gamma1) <= ctl.fold_band * gamma_ref:
                return
            easy = easy + 1 if rep.iterations <= ctl.easy_iterations else 0
            if easy >= 3:
                dalpha = min(dalpha * ctl.grow, dalpha_max)
                easy = 0

    # -- phase 2: pseudo-arclength in v = log u ------------------------------

    def _setup_scales(self, alpha, u):
        self.asc = float(alpha)
        self.fsc = residual_scale(self.spec, alpha, u)

    def rescale(self, y, t):
        """Re-centre the α scale and residual scale on y; returns (y, t) in the
        new coordinates."""
        alpha, u = self.from_y(y)
        old_a = self.asc
        self._setup_scales(alpha, u)
        t = np.append(t[:-1], t[-1] * old_a / self.asc)
        return self.to_y(alpha, u), t / np.linalg.norm(t)

    def to_y(self, alpha, u):
        # log u measured in RMS so that its weight does not grow with the grid
        return np.append(np.log(u) / self.rms, alpha / self.asc)

    def from_y(self, y):
        return y[-1] * self.asc, np.exp(y[:-1] * self.rms)

    def _blocks(self, y):
        alpha, u = self.from_y(y)
        jd = jacobian(self.spec, alpha, u).dense() * (u * self.rms / self.fsc)[None, :]
        g = d_residual_d_alpha(self.spec, alpha, u) * (self.asc / self.fsc)
        return jd, g

    def _bordered(self, y, row):
        jd, g = self._blocks(y)
        n = jd.shape[0]
        m = np.zeros((n + 1, n + 1))
        m[:n, :n] = jd
        m[:n, n] = g
        m[n] = row
        return m

    def tangent(self, y, t_prev):
        rhs = np.zeros(y.size)
        rhs[-1] = 1.0
        t = np.linalg.solve(self._bordered(y, t_prev), rhs)
        t /= np.linalg.norm(t)
        return t if t @ t_prev > 0 else -t

    def correct(self, y_base, t_plane, sigma, max_iter=15):
        """Solve F = 0 on the hyperplane t·(y - y_base) = σ."""
        y = y_base + sigma * t_plane
        for _ in range(max_iter):
            alpha, u = self.from_y(y)
            if alpha <= 0 or not np.all(np.isfinite(u)):
                raise SolverError("arclength corrector left the admissible region")
            r, sup = residual(self.spec, alpha, u)
            c = t_plane @ (y - y_base) - sigma
            # exp() of the log variables costs a relative eps·|log u| in u
            floor = rounding_floor(self.spec, alpha, u) * max(1.0, float(np.max(np.abs(np.log(u)))))
            target = max(nonlinear.newton_tolerance(self.spec, alpha, u, self.ctl.newton_tol), floor)
            if sup <= target and abs(c) <= 1e-12:
                return y
            step = np.linalg.solve(self._bordered(y, t_plane), -np.append(r / self.fsc, c))
            if np.max(np.abs(step[:-1])) * self.rms > 2.0:  # more than a factor e² in u
                raise SolverError("arclength corrector diverging")
            y = y + step
        raise SolverError("arclength corrector did not converge")

    def point_from_y(self, y, label, fold_coordinate=None):
        alpha, u = self.from_y(y)
        try:  # polish in u itself at fixed α
            u = nonlinear.newton_solve(self.spec, alpha, u, tol=self.ctl.newton_tol, max_iter=3).solution
        except SolverError:
            pass
        return self.make_point(alpha, u, label, fold_coordinate)

    def gamma_at(self, y):
        alpha, u = self.from_y(y)
        return spectral.linearized_gamma1(self.spec, alpha, u).value

    def _steep_again(self, t) -> bool:
        """Past the fold the curve becomes a graph over α again once the mean
        slope d(log u)/d(log α) is within a factor 3 of its asymptotic value -1/(1-q)."""
        if t[-1] >= 0:
            return False
        slope = float(np.mean(t[:-1])) * self.rms / t[-1]
        return abs(slope) <= 3.0 * self.p

    def arclength_phase(self, t_init):
        ctl = self.ctl
        last = self.points[-1]
        self._setup_scales(last.alpha, last.u)
        y = self.to_y(last.alpha, last.u)
        self.raw[-1] = (last.alpha, last.u)
        t = self.tangent(y, t_init)
        gam = last.gamma1
        ds = ctl.ds0
        easy = 0
        since_fold = 0
        while len(self.points) < ctl.max_points:
            try:
                y_new = self.correct(y, t, ds)
            except (SolverError, np.linalg.LinAlgError):
                ds *= 0.5
                if ds < ctl.ds_min:
                    self.reason = "step underflow"
                    return None
                easy = 0
                continue
            g_new = self.gamma_at(y_new)
            if not self.fold_found and gam > 0 and g_new < 0:
                y, t = self.rescale(*self.locate_fold(y, t, gam, y_new, ds))
                gam = self.points[-1].gamma1
                ds = ctl.ds0
                continue
            label = "upper" if self.fold_found else "lower"
            self.add(self.point_from_y(y_new, label), y_new)
            y, t = self.rescale(y_new, self.tangent(y_new, t))
            gam = g_new
            easy += 1
            if easy >= 3:
                ds = min(ds * ctl.grow, ctl.ds_max)
                easy = 0
            if self.fold_found:
                since_fold += 1
                if self._steep_again(t) or since_fold >= 60:
                    return t
        self.reason = "max points"
        return None

    def locate_fold(self, y_a, t_a, g_a, y_b, ds):
        """Regula falsi (Illinois) on γ₁ along the tangent of the last stable point,
        then sample ±k·δ along the fold tangent."""
        ctl = self.ctl
        lo, hi, g_lo, g_hi = 0.0, ds, g_a, self.gamma_at(y_b)
        y_f, g_f = y_b, g_hi
        side = 0
        for _ in range(100):
            s = (lo * g_hi - hi * g_lo) / (g_hi - g_lo)
            y_f = self.correct(y_a, t_a, s)
            g_f = self.gamma_at(y_f)
            if abs(g_f) <= ctl.fold_tol or hi - lo <= 1e-14:
                break
            if g_f > 0:
                lo, g_lo = s, g_f
                if side == 1:
                    g_hi *= 0.5
                side = 1
            else:
                hi, g_hi = s, g_f
                if side == -1:
                    g_lo *= 0.5
                side = -1
        t_f = self.tangent(y_f, t_a)
        delta = ctl.fold_delta
        # drop trailing points that fall inside the sampling window
        while len(self.points) > 1 and self.raw[-1] is not None:
            if t_f @ (self.to_y(*self.raw[-1]) - y_f) <= -5.5 * delta:
                break
            self.points.pop()
            self.raw.pop()
        samples = []
        for k in range(-5, 6):
            if k == 0:
                samples.append((y_f, 0.0))
                continue
            samples.append((self.correct(y_f, t_f, k * delta), k * delta))
        for y_k, off in samples:
            label = "upper" if off > 0 else "lower"
            self.add(self.point_from_y(y_k, label, fold_coordinate=off), y_k)
        self.fold_found = True
        y_end = samples[-1][0]
        return y_end, self.tangent(y_end, t_f)

    # -- phase 3: natural parameter on the rescaled upper branch ------------

    def natural_upper(self):
        ctl, q = self.ctl, self.spec.q
        pts = self.points
        a1, a0 = pts[-1].alpha, pts[-2].alpha
        w1, w0 = p_to_r(a1, pts[-1].u, q), p_to_r(a0, pts[-2].u, q)
        dlog = ctl.dlog_alpha0
        dlog_cap = min(ctl.dlog_alpha_max, ctl.max_decades * math.log(10.0) * (1.0 - q))
        easy = 0
        while len(self.points) < ctl.max_points:
            if a1 <= ctl.alpha_min * (1 + 1e-12):
                self.reason = "alpha_min reached"
                return
            a_new = max(a1 * math.exp(-dlog), ctl.alpha_min)
            if math.log10(np.max(w1)) - self.p * math.log10(a_new) > ctl.overflow_log10:
                self.reason = "overflow guard"
                return
            slope = (w1 - w0) / (a1 - a0) if a1 != a0 else 0.0
            guess = w1 + (a_new - a1) * slope
            if np.min(guess) <= 0:
                guess = w1.copy()
            try:
                rep = nonlinear.newton_solve(self.rspec, a_new, guess, tol=ctl.newton_tol, max_iter=15)
                pt = self.make_point(a_new, r_to_p(a_new, rep.solution, q), "upper")
                if pt.gamma1 >= 0:
                    raise SolverError("jumped off the unstable branch")
            except SolverError:
                dlog *= 0.5
                easy = 0
                if dlog < 1e-10:
                    self.reason = "step underflow"
                    return
                continue
            self.add(pt)
            a0, w0, a1, w1 = a1, w1, a_new, rep.solution
            easy = easy + 1 if rep.iterations <= ctl.easy_iterations else 0
            if easy >= 3:
                dlog = min(dlog * ctl.grow, dlog_cap)
                easy = 0
        self.reason = "max points"


def _set_arclength(points: list, alpha_ref: float) -> None:
    """Cumulative chord length in the (α/α_ref, log10 ‖u‖∞) metric."""
    s = 0.0
    for i, p in enumerate(points):
        if i:
            prev = points[i - 1]
            s += math.hypot((p.alpha - prev.alpha) / alpha_ref, math.log10(p.u_max / prev.u_max))
        p.arclength = s


def start_point(spec: ProblemSpec, u_n: np.ndarray | None = None) -> BranchPoint:
    if u_n is None:
        u_n = nonlinear.solve_uN(spec.weight, spec.q, spec.domain).solution
    g = spectral.linearized_gamma1(spec, 0.0, u_n).value
    return BranchPoint(0.0, u_n, g, spectral.stability_tag(g), 0.0, "lower")


def trace_branch(
    spec: ProblemSpec,
    start: BranchPoint | None = None,
    direction: str = "+alpha",
    ctl: StepControl | None = None,
) -> Branch:
    """Trace the solution curve of (P_α) or (S_α).

    ``direction="+alpha"`` starts on the lower branch (by default at (0, u_N))
    and continues through the fold down the upper branch. ``"-alpha"`` starts
    from an upper-branch point and only runs phase 3.
    """
    ctl = ctl or StepControl()
    if direction not in ("+alpha", "-alpha"):
        raise ConfigError(f"direction must be '+alpha' or '-alpha', got {direction!r}")
    tr = _Tracer(spec, ctl)
    if direction == "-alpha":
        if start is None or start.alpha <= 0:
            raise ConfigError("'-alpha' tracing needs an upper-branch start with α > 0")
        start.branch_label = "upper"
        tr.add(start)
        # a second point to seed the secant predictor
        a1 = start.alpha * math.exp(-ctl.dlog_alpha0 * 0.1)
        w = p_to_r(start.alpha, start.u, spec.q)
        rep = nonlinear.newton_solve(tr.rspec, a1, w, tol=ctl.newton_tol)
        tr.add(tr.make_point(a1, r_to_p(a1, rep.solution, spec.q), "upper"))
        tr.fold_found = True
        tr.natural_upper()
        branch = Branch(tr.points, None, tr.reason, spec.family, spec.q)
        _set_arclength(branch.points, start.alpha)
        return branch

    if start is None:
        start = start_point(spec)
    tr.add(start)
    bound = alpha_s_upper_bound(spec.weight, spec.q, spec.domain, spec.family, u_n=start.u)
    dalpha = ctl.dalpha0 if ctl.dalpha0 else bound / 25.0
    tr.natural_lower(start.u, start.gamma1, dalpha, dalpha_max=bound / 8.0)
    if not tr.reason:
        last = tr.points[-1]
        du = solve_linear(jacobian(spec, last.alpha, last.u), -d_residual_d_alpha(spec, last.alpha, last.u))
        # initial tangent in the scaled (log u, α) coordinates, α increasing
        t0 = np.append(du / last.u * last.alpha / tr.rms, 1.0)
        t0 /= np.linalg.norm(t0)
        t_end = tr.arclength_phase(t0)
        if t_end is not None:
            tr.natural_upper()
    branch = Branch(tr.points, None, tr.reason, spec.family, spec.q)
    alpha_ref = max(p.alpha for p in branch.points)
    _set_arclength(branch.points, alpha_ref)
    if tr.fold_found:
        branch.fold = fold_diagnostics(branch)
    uppers = branch.labelled("upper")
    branch.info["alpha_bar_observed"] = max((p.alpha for p in uppers), default=None)
    branch.info["alpha_min_reached"] = min((p.alpha for p in uppers), default=None)
    return branch


# --------------------------------------------------------------------------
# fold geometry


def fold_diagnostics(branch: Branch) -> FoldRecord:
    """Fold location and shape from the symmetric samples along the fold tangent.

    α(σ) is fitted by a cubic in the tangent offset σ over the ±5 samples; the
    cubic term keeps odd contributions out of the slope estimate.
    β″ = α''(0), bend_left = β″ < 0.
    """
    idx = [i for i, p in enumerate(branch.points) if p.fold_coordinate is not None]
    if len(idx) < 7:
        raise SolverError("fold window too coarse: refine the branch near the fold", samples=len(idx))
    sig = np.array([branch.points[i].fold_coordinate for i in idx])
    al = np.array([branch.points[i].alpha for i in idx])
    centre = idx[int(np.argmin(np.abs(sig)))]
    fold_pt = branch.points[centre]
    coef = np.polyfit(sig, al - fold_pt.alpha, 3)
    c3, c2, c1, c0 = coef
    beta2 = 2.0 * c2
    width = float(np.max(np.abs(sig)))
    scale = abs(beta2) * width
    dads = c1
    before = branch.points[centre - 1].u
    after = branch.points[centre + 1].u
    diff = after - before
    one_signed = bool(np.all(diff > 0) or np.all(diff < 0))
    return FoldRecord(
        alpha_s=fold_pt.alpha,
        u_fold=fold_pt.u,
        bend_left=bool(beta2 < 0),
        beta_second=float(beta2),
        gamma1=fold_pt.gamma1,
        dalpha_ds=float(dads),
        tangent_ok=bool(abs(dads) <= 1e-3 * scale),
        secant_one_signed=one_signed,
        alpha_fit=float(fold_pt.alpha + c0),
        index=centre,
    )


# --------------------------------------------------------------------------
# bounds, asymptotics and checkable conditions


def alpha_s_upper_bound(a: Weight, q: float, domain: Domain, family: str = "P", u_n=None) -> float:
    """-∫a / ∫_∂Ω u_N^{1-q} (P) or -∫a / ∫_Ω u_N^{1-q} (S)."""
    if u_n is None:
        u_n = nonlinear.solve_uN(a, q, domain).solution
    num = -integrate_volume(a.values, domain)
    if family in ("S", "RS"):
        return num / integrate_volume(u_n ** (1.0 - q), domain)
    return num / integrate_boundary(u_n ** (1.0 - q), domain)


def c_a(a: Weight | float, q: float, domain: Domain | None = None, family: str = "P", boundary_measure=None):
    """(-∫a/|∂Ω|)^{1/(1-q)} for P, (-∫a/|Ω|)^{1/(1-q)} for S.

    ``a`` may also be the number ∫a, with ``boundary_measure`` the relevant
    measure (|∂Ω| or |Ω|).
    """
    if isinstance(a, Weight):
        total = integrate_volume(a.values, domain)
        meas = domain.volume if family in ("S", "RS") else domain.boundary_measure
    else:
        total = float(a)
        meas = boundary_measure
    if total >= 0:
        raise ConfigError("c_a needs ∫a < 0")
    return (-total / meas) ** _exponent(q)


def upper_branch_asymptote(branch: Branch, q: float, a: Weight, domain: Domain, n: int = 5) -> dict:
    """Limit of α^{1/(1-q)} ‖u‖∞ on the upper branch versus c_a."""
    ups = sorted(branch.labelled("upper"), key=lambda p: p.alpha)
    if len(ups) < n:
        raise SolverError("too few small-α upper-branch points", found=len(ups))
    last = ups[:n]
    p = _exponent(q)
    alphas = np.array([pt.alpha for pt in last])
    ws = [p_to_r(pt.alpha, pt.u, q) for pt in last]
    wmax = np.array([float(np.max(w)) for w in ws])
    slope, intercept = np.polyfit(alphas, wmax, 1)
    ca = c_a(a, q, domain, branch.family)
    # along the branch α decreases, so reverse the ascending order
    flat = [float((np.max(w) - np.min(w)) / np.mean(w)) for w in ws][::-1]
    return {
        "c_fit": float(intercept),
        "c_a": ca,
        "rel_err": abs(intercept - ca) / ca,
        "rel_err_at_min_alpha": abs(wmax[0] - ca) / ca,
        "alpha_min": float(alphas[0]),
        "flatness": flat,
        "flatness_decreasing": bool(all(f2 < f1 for f1, f2 in zip(flat, flat[1:]))),
        "exponent": p,
    }


def radial_K(a: Weight, domain: Domain) -> tuple[float, float]:
    """(K, q̲) for the two-level radial weight: K = ∫_{A_R0} a⁺ / (|B_R0| ‖a⁻‖∞)."""
    if domain.kind != "radial" or a.preset != "radial_annulus":
        raise ConfigError("K and q̲ are only defined for the radial_annulus weight")
    r0 = a.params["R0"]
    r = domain.nodes
    inner = r <= r0
    num = integrate_volume(np.where(~inner, np.maximum(a.values, 0.0), 0.0), domain)
    ball = unit_ball_volume_r(domain.dim, r0)
    sup_neg = float(np.max(np.maximum(-a.values[inner], 0.0)))
    k = num / (ball * sup_neg)
    return k, q_underbar(k, domain.dim)


def unit_ball_volume_r(dim: int, radius: float) -> float:
    from .domain_grid import unit_ball_volume

    return unit_ball_volume(dim) * radius**dim


def q_underbar(k: float, dim: int) -> float:
    return (1.0 - k) / (1.0 - k + 2.0 * k / dim)


def radial_sufficient(a: Weight, q: float, domain: Domain) -> dict:
    """(∫_{B_R0} a⁻ − ∫_{A_R0} a⁺) / ∫_{R0}^{R} (∫_{A_t} a⁺) dt  ≤  (1-q)/R."""
    if domain.kind != "radial" or a.preset != "radial_annulus":
        raise ConfigError("the radial sufficient condition needs the radial_annulus weight")
    r0, big_r = a.params["R0"], domain.size
    r = domain.nodes
    pos = np.maximum(a.values, 0.0) * domain.cell_volumes
    neg = np.maximum(-a.values, 0.0) * domain.cell_volumes
    inner = r <= r0
    # ∫_{A_t} a⁺ at every node t, then the outer integral by the trapezoid rule
    tail = np.cumsum(pos[::-1])[::-1]
    mask = r >= r0
    outer = float(trapezoid(tail[mask], r[mask]))
    lhs = (float(neg[inner].sum()) - float(pos[~inner].sum())) / outer
    rhs = (1.0 - q) / big_r
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs), "margin": rhs - lhs}


def check_conditions(a: Weight, q: float, domain: Domain, family: str = "P", u_n=None) -> dict:
    """Evaluate the checkable sufficient conditions with both sides and margins."""
    stats = a.stats
    if u_n is None:
        u_n = nonlinear.solve_uN(a, q, domain).solution
    total = integrate_volume(a.values, domain)
    a2 = spectral.alpha2(domain)
    a2n = spectral.neumann_alpha2(domain)
    sigma, _ = spectral.sigma1_neumann(a, domain)
    hip_lhs = -total / integrate_boundary(u_n ** (1 - q), domain)
    hips_lhs = -total / integrate_volume(u_n ** (1 - q), domain)
    mu_lhs = -sigma * total
    mu_rhs = domain.boundary_measure * a2
    lo = max(stats.c_a - domain.boundary_measure * a2 / (sigma * stats.integral_pos), 1.0)
    report = {
        "family": family,
        "q": q,
        "hip": {"lhs": hip_lhs, "rhs": a2, "holds": bool(hip_lhs <= a2), "margin": a2 - hip_lhs},
        "hip_s": {"lhs": hips_lhs, "rhs": a2n, "holds": bool(hips_lhs <= a2n), "margin": a2n - hips_lhs},
        "mu": {"lhs": mu_lhs, "rhs": mu_rhs, "holds": bool(mu_lhs < mu_rhs), "margin": mu_rhs - mu_lhs},
        "k_window": {"low": lo, "high": stats.c_a, "nonempty": bool(lo < stats.c_a)},
        "sigma1_N": sigma,
        "alpha2": a2,
        "alpha2_neumann": a2n,
        "K": None,
        "q_underbar": None,
        "radial_hip_sufficient": None,
    }
    if domain.kind == "radial" and a.preset == "radial_annulus":
        k, qb = radial_K(a, domain)
        report["K"] = k
        report["q_underbar"] = qb
        report["radial_hip_sufficient"] = radial_sufficient(a, q, domain)
    return report


# --------------------------------------------------------------------------
# solutions at a given α, sweeps and census


def solution_at(spec: ProblemSpec, branch: Branch, alpha: float, label: str) -> np.ndarray:
    """Newton solve at ``alpha`` seeded by interpolation between the
    neighbouring branch points of the given label (rescaled form on the upper
    branch)."""
    pts = [p for p in branch.labelled(label)]
    if not pts:
        raise SolverError(f"branch has no {label} points")
    alphas = np.array([p.alpha for p in pts])
    if alpha > alphas.max() * (1 + 1e-12) or alpha < alphas.min() * (1 - 1e-12):
        raise SolverError(f"α = {alpha} outside the traced {label} branch", low=alphas.min(), high=alphas.max())
    order = np.argsort(np.abs(alphas - alpha))
    i, j = order[0], order[1] if len(order) > 1 else order[0]
    q = spec.q
    if label == "upper":
        rs = spec.with_family(RESCALED[spec.family])
        wi, wj = p_to_r(alphas[i], pts[i].u, q), p_to_r(alphas[j], pts[j].u, q)
        guess = wi if i == j or alphas[i] == alphas[j] else wi + (alpha - alphas[i]) * (wj - wi) / (alphas[j] - alphas[i])
        if np.min(guess) <= 0:
            guess = wi
        w = nonlinear.newton_solve(rs, alpha, guess).solution
        return r_to_p(alpha, w, q)
    ui, uj = pts[i].u, pts[j].u
    guess = ui if i == j or alphas[i] == alphas[j] else ui + (alpha - alphas[i]) * (uj - ui) / (alphas[j] - alphas[i])
    if np.min(guess) <= 0:
        guess = ui
    return nonlinear.newton_solve(spec, alpha, guess).solution


def census_alpha_grid(alpha_s: float, n: int = 8, eps: float = 0.05) -> np.ndarray:
    return np.linspace(eps * alpha_s, (1 - eps) * alpha_s, n + 2)[1:-1]


def _random_profile(rng, x):
    bump = sum(rng.normal(scale=0.5) * np.cos(k * np.pi * x) for k in range(1, 5))
    return np.exp(bump)


def two_solution_census(
    spec: ProblemSpec,
    alpha_grid,
    multistart_n: int = 20,
    branch: Branch | None = None,
    seed: int = 0,
    u_n: np.ndarray | None = None,
) -> list[dict]:
    """Count distinct P°-solutions at each α from branch crossings plus
    multistart Newton solves from randomized positive initializers."""
    if branch is None:
        branch = trace_branch(spec)
    if u_n is None:
        u_n = branch.points[0].u
    rng = np.random.default_rng(seed)
    x = spec.domain.nodes / spec.domain.size
    out = []
    for alpha in alpha_grid:
        alpha = float(alpha)
        found: list[tuple[np.ndarray, str]] = []
        notes = []
        for label in ("lower", "upper"):
            try:
                found.append((solution_at(spec, branch, alpha, label), label))
            except SolverError as exc:
                notes.append(f"{label} crossing: {exc}")
        if found:
            lo_scale = 0.1 * min(float(np.min(u)) for u, _ in found)
            hi_scale = 10.0 * max(float(np.max(u)) for u, _ in found)
        else:
            lo_scale, hi_scale = 0.1 * float(np.min(u_n)), 10.0 * float(np.max(u_n))
        failures = 0
        for _ in range(multistart_n):
            amp = 10 ** rng.uniform(math.log10(lo_scale), math.log10(hi_scale))
            start = amp * _random_profile(rng, x)
            try:
                sol = nonlinear.newton_solve(spec, alpha, start, max_iter=200).solution
            except SolverError:
                failures += 1
                continue
            if nonlinear.classify_solution(sol)["in_P°"]:
                found.append((sol, "multistart"))
            else:
                failures += 1
        clusters: list[tuple[np.ndarray, str]] = []
        for u, src in found:
            for k, (v, vsrc) in enumerate(clusters):
                if np.max(np.abs(u - v)) <= 1e-5 * max(np.max(u), np.max(v)):
                    if vsrc == "multistart" and src != "multistart":
                        clusters[k] = (u, src)
                    break
            else:
                clusters.append((u, src))
        clusters.sort(key=lambda c: float(np.max(c[0])))
        gammas = [spectral.linearized_gamma1(spec, alpha, u).value for u, _ in clusters]
        sols = [u for u, _ in clusters]
        lower = sols[0] if sols else None
        unorm = float(np.max(u_n))
        rec = {
            "alpha": alpha,
            "count": len(clusters),
            "sources": [src for _, src in clusters],
            "u_max": [float(np.max(u)) for u in sols],
            "gamma1": gammas,
            "n_stable": sum(g > spectral.STABILITY_TOL for g in gammas),
            "n_unstable": sum(g < -spectral.STABILITY_TOL for g in gammas),
            "failures": failures,
            "notes": notes,
            "minimal_is_lower": bool(
                lower is not None
                and all(np.all(lower <= u + 1e-8 * float(np.max(u))) for u in sols)
            ),
            "ordered": bool(len(sols) == 2 and np.all(sols[1] - sols[0] > 0)),
            "above_uN": bool(all(np.all(u >= u_n - 1e-8 * unorm) for u in sols)),
            "solutions": sols,
        }
        out.append(rec)
    return out


def q_sweep(
    a: Weight,
    alpha_fixed: float,
    q_grid,
    domain: Domain,
    family: str = "P",
    ctl: StepControl | None = None,
) -> dict:
    """Per-q two solutions at a fixed α, their scaled distance to the limit
    profiles t±φ±₁ and the fold location α_s(q) versus β₀(a)."""
    q_grid = [float(q) for q in q_grid]
    b0 = spectral.beta0(a, domain)
    if not 0 < alpha_fixed < b0:
        raise ConfigError(f"alpha_fixed must lie in (0, β₀) = (0, {b0:.6g})")
    pair = spectral.principal_weighted(a, alpha_fixed, domain)
    t_plus = spectral.t_from_eigenfunction(a, pair.phi_plus, domain)
    t_minus = spectral.t_from_eigenfunction(a, pair.phi_minus, domain)
    records = []
    for q in q_grid:
        rec = {"q": q}
        try:
            spec = ProblemSpec(family, q, a, domain)
            br = trace_branch(spec, ctl=ctl or StepControl(alpha_min=max(alpha_fixed / 4, 1e-3)))
            p = _exponent(q)
            rec["alpha_s"] = br.fold.alpha_s if br.fold else None
            u1 = solution_at(spec, br, alpha_fixed, "lower")
            u2 = solution_at(spec, br, alpha_fixed, "upper")
            rec["U1_max"] = float(np.max(u1))
            rec["U2_max"] = float(np.max(u2))
            rec["e1"] = float(np.max(np.abs(pair.lam_plus**p * u1 - t_plus * pair.phi_plus)))
            rec["e2"] = float(np.max(np.abs(pair.lam_minus**p * u2 - t_minus * pair.phi_minus)))
            rec["error"] = None
        except SolverError as exc:
            rec["error"] = str(exc)
        records.append(rec)

    def strictly_decreasing(key):
        vals = [r.get(key) for r in records]
        return None not in vals and all(b < a_ for a_, b in zip(vals, vals[1:]))

    gaps = [abs(r["alpha_s"] - b0) if r.get("alpha_s") is not None else None for r in records]
    for r, g in zip(records, gaps):
        r["gap_to_beta0"] = g
    trich = "U1 -> 0" if pair.lam_plus > 1 else ("U1 bounded" if pair.lam_plus == 1 else "U1 -> infinity")
    return {
        "alpha_fixed": alpha_fixed,
        "beta0": b0,
        "lambda_minus": pair.lam_minus,
        "lambda_plus": pair.lam_plus,
        "t_plus": t_plus,
        "t_minus": t_minus,
        "trichotomy": trich,
        "records": records,
        "e1_decreasing": strictly_decreasing("e1"),
        "e2_decreasing": strictly_decreasing("e2"),
        "gap_decreasing": None not in gaps and all(b < a_ for a_, b in zip(gaps, gaps[1:])),
        "final_rel_gap": gaps[-1] / b0 if gaps and gaps[-1] is not None else None,
    }


def rescaling_gap(spec: ProblemSpec, alpha: float, u) -> float:
    """|R(α^{1/(1-q)} u) − α^{1/(1-q)} P(u)| relative to α^{1/(1-q)}·scale(P);
    zero up to rounding since the two residuals are the same equation."""
    if alpha <= 0:
        return 0.0
    fam_r = RESCALED[spec.family]
    p = _exponent(spec.q)
    rp, _ = residual(spec, alpha, u)
    rr, _ = residual(spec.with_family(fam_r), alpha, p_to_r(alpha, u, spec.q))
    return float(np.max(np.abs(rr - alpha**p * rp)) / (alpha**p * residual_scale(spec, alpha, u)))
