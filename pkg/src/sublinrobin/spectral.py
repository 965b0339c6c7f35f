"""Eigenvalue computations.

All eigenproblems here reduce to the symmetric tridiagonal matrix
``W^{1/2} A W^{-1/2}`` of an assembled operator. Selected eigenpairs come from
LAPACK's Sturm-sequence bisection (``stebz``) followed by inverse iteration
(``stein``), through :func:`scipy.linalg.eigh_tridiagonal`.

Weighted principal eigenvalues λ±₁(m, α) are the zeros of the concave map
λ ↦ μ₁(λ, α, m), the smallest eigenvalue of ``-Δ - λ m`` with Robin(α)
closure. The threshold β₀(m) is where that map stops reaching zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar

from .domain_grid import Domain, Weight, integrate_volume
from .elliptic import (
    LinearOperator,
    ProblemSpec,
    assemble,
    boundary_alpha,
    jacobian,
    linearized_potential,
    solve_weak,
)
from .errors import (
    BracketError,
    ConfigError,
    DegenerateNormalizationError,
    NoConvergenceError,
    NoPrincipalEigenvalueError,
    SolverError,
)

STABILITY_TOL = 1e-7
ROOT_XTOL = 1e-12


@dataclass(frozen=True, eq=False)
class EigenResult:
    value: float
    eigenfunction: np.ndarray
    index: int
    residual: float
    sign_profile: str  # "positive" | "sign_changing"

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "index": self.index,
            "residual": self.residual,
            "sign_profile": self.sign_profile,
            "eigenfunction": [float(v) for v in self.eigenfunction],
        }


def _weights_of(m) -> np.ndarray:
    return np.asarray(m.values if isinstance(m, Weight) else m, dtype=float)


def _fix_sign(phi: np.ndarray) -> np.ndarray:
    return phi if phi[np.argmax(np.abs(phi))] >= 0 else -phi


def eigenpairs(op: LinearOperator, k: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """The k smallest eigenvalues and nodal eigenvectors (active nodes, ∫φ² = 1)."""
    d, e = op.symmetric_bands()
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1), lapack_driver="stebz")
    phis = vecs / np.sqrt(op.weights)[:, None]
    return vals, phis


def eigen_values(op: LinearOperator, k: int = 1) -> np.ndarray:
    d, e = op.symmetric_bands()
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, k - 1), lapack_driver="stebz")


def _result(op: LinearOperator, value: float, phi_active: np.ndarray, index: int) -> EigenResult:
    phi = op.extend(_fix_sign(phi_active))
    res = float(np.max(np.abs(op.matvec(phi) - value * phi)))
    inner = phi[op.offset :]
    top = np.max(np.abs(inner))
    positive = bool(np.all(inner > 1e-10 * top))
    return EigenResult(
        value=float(value),
        eigenfunction=phi,
        index=index,
        residual=res,
        sign_profile="positive" if positive else "sign_changing",
    )


def eigen_k(op: LinearOperator, k: int) -> EigenResult:
    vals, phis = eigenpairs(op, k)
    return _result(op, vals[k - 1], phis[:, k - 1], k)


def _parse_mode(boundary_mode, alpha: float) -> tuple[str, float]:
    if isinstance(boundary_mode, tuple):
        boundary_mode, alpha = boundary_mode
    return boundary_mode, float(alpha)


def smallest_eigen(potential, boundary_mode, domain: Domain, ell: int = 0, alpha: float = 0.0) -> EigenResult:
    """Smallest eigenpair of ``-Δ + V``; ``boundary_mode`` is "neumann",
    "robin" (with ``alpha``) or a tuple ``("robin", α)``."""
    mode, al = _parse_mode(boundary_mode, alpha)
    op = assemble(domain, potential, mode, alpha=al, angular_mode=ell)
    return eigen_k(op, 1)


def weighted_operator(lam: float, m, alpha: float, domain: Domain, ell: int = 0) -> LinearOperator:
    """``-Δ - λ m`` with Robin(α) closure (α = 0 is Neumann)."""
    return assemble(domain, -lam * _weights_of(m), "robin", alpha=alpha, angular_mode=ell)


def mu_k(k: int, lam: float, m, alpha: float, domain: Domain, ell: int = 0) -> EigenResult:
    """k-th eigenpair of ``-Δφ - λ m φ = μ φ``, ``∂_ν φ = α φ``."""
    if k not in (1, 2, 3):
        raise ConfigError("mu_k supports k in {1, 2, 3}")
    return eigen_k(weighted_operator(lam, m, alpha, domain, ell), k)


def mu_value(k: int, lam: float, m, alpha: float, domain: Domain, ell: int = 0) -> float:
    return float(eigen_values(weighted_operator(lam, m, alpha, domain, ell), k)[k - 1])


def stability_tag(gamma1: float, tol: float = STABILITY_TOL) -> str:
    if gamma1 > tol:
        return "asymptotically_stable"
    if gamma1 < -tol:
        return "unstable"
    return "weakly_degenerate"


def linearized_gamma1(spec: ProblemSpec, alpha: float, u) -> EigenResult:
    """Smallest eigenpair of the linearization at a positive solution."""
    return eigen_k(jacobian(spec, alpha, u), 1)


# --------------------------------------------------------------------------
# principal eigenvalues with indefinite weight


class PrincipalPair(NamedTuple):
    lam_minus: float
    lam_plus: float
    phi_minus: np.ndarray
    phi_plus: np.ndarray


def _require_sign_changing(m: np.ndarray) -> None:
    if not (np.any(m > 0) and np.any(m < 0)):
        raise ConfigError("weight must change sign")


def _lambda_scale(m: np.ndarray, domain: Domain) -> float:
    return (math.pi / domain.size) ** 2 / max(float(np.max(np.abs(m))), 1e-300)


def mu1_peak(m, alpha: float, domain: Domain) -> tuple[float, float]:
    """(argmax_λ μ₁(λ, α, m), max value); the map is concave in λ."""
    m = _weights_of(m)
    scale = _lambda_scale(m, domain)
    f = lambda lam: -mu_value(1, lam, m, alpha, domain)  # noqa: E731
    res = minimize_scalar(f, bracket=(0.0, scale), method="brent", tol=1e-12)
    return float(res.x), float(-res.fun)


def _expand(f, start: float, step: float, limit: int = 200) -> float:
    x = start + step
    for _ in range(limit):
        if f(x) < 0:
            return x
        step *= 2.0
        x = start + step
    raise BracketError("could not bracket a sign change", start=start, last=x)


def principal_weighted(m, alpha: float, domain: Domain) -> PrincipalPair:
    """Principal eigenvalues λ₋₁ < λ₊₁ of ``-Δφ = λ m φ`` with ``∂_ν φ = α φ``.

    The eigenfunctions are positive with ``∫φ² = 1``; ``∫ m φ₊₁² > 0`` and
    ``∫ m φ₋₁² < 0``.
    """
    m = _weights_of(m)
    _require_sign_changing(m)
    lam_star, peak = mu1_peak(m, alpha, domain)
    if peak <= 0.0:
        raise NoPrincipalEigenvalueError(
            "no principal eigenvalue: max_λ μ₁(λ, α, m) <= 0", alpha=alpha, peak=peak, argmax=lam_star
        )
    f = lambda lam: mu_value(1, lam, m, alpha, domain)  # noqa: E731
    scale = _lambda_scale(m, domain)
    try:
        lo = _expand(f, lam_star, -scale)
        hi = _expand(f, lam_star, scale)
    except BracketError as exc:
        samples = {lam: f(lam) for lam in np.linspace(lam_star - 10 * scale, lam_star + 10 * scale, 9)}
        raise BracketError("principal eigenvalue bracketing failed", samples=samples) from exc
    lam_minus = brentq(f, lo, lam_star, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
    lam_plus = brentq(f, lam_star, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
    phi_minus = mu_k(1, lam_minus, m, alpha, domain).eigenfunction
    phi_plus = mu_k(1, lam_plus, m, alpha, domain).eigenfunction
    return PrincipalPair(lam_minus, lam_plus, phi_minus, phi_plus)


def sigma1_neumann(a, domain: Domain) -> tuple[float, np.ndarray]:
    """Positive principal eigenvalue σ₁ᴺ(a) of ``-Δφ = σ a φ`` (Neumann), with φ₁.

    Requires ∫a < 0, in which case σ₁ᴺ(a) = λ₊₁(a, 0).
    """
    a = _weights_of(a)
    if integrate_volume(a, domain) >= 0:
        raise ConfigError("σ₁ᴺ(a) > 0 requires ∫a < 0")
    pair = principal_weighted(a, 0.0, domain)
    return pair.lam_plus, pair.phi_plus


# --------------------------------------------------------------------------
# Steklov and Neumann thresholds


@dataclass(frozen=True)
class SteklovSpectrum:
    values: tuple[float, ...]
    modes: tuple[tuple[int, int], ...]  # (ℓ, k) the value came from

    @property
    def alpha2(self) -> float:
        positive = [v for v in self.values if v > 1e-9]
        if not positive:
            raise BracketError("no positive Steklov eigenvalue found")
        return positive[0]


def _radius(domain: Domain) -> float:
    return domain.size / 2.0 if domain.kind == "interval" else domain.size


def steklov_spectrum(domain: Domain, ell_max: int = 4) -> SteklovSpectrum:
    """Steklov eigenvalues α_j, as zeros of α ↦ μ_k^{(ℓ)}(0, α) for k ≤ 2, ℓ ≤ ℓ_max.

    μ_k(α) is nonincreasing in α, so each (ℓ, k) contributes at most one zero.
    """
    if domain.kind == "interval":
        modes = [0]
    else:
        if ell_max < 1 and domain.dim >= 2:
            raise ConfigError("radial Steklov spectrum needs ell_max >= 1")
        modes = list(range(0, ell_max + 1)) if domain.dim >= 2 else [0]
    zero = np.zeros(domain.n_nodes)
    found: list[tuple[float, tuple[int, int]]] = []
    limit = 1e4 / _radius(domain)
    for ell in modes:
        for k in (1, 2):
            f = lambda al: float(  # noqa: E731
                eigen_values(assemble(domain, zero, "robin", alpha=al, angular_mode=ell), k)[k - 1]
            )
            f0 = f(0.0)
            if abs(f0) <= 1e-9 * (1.0 + abs(eigen_values(assemble(domain, zero, "neumann", angular_mode=ell), 1)[0])):
                found.append((0.0, (ell, k)))
                continue
            if f0 < 0:
                continue
            hi = (ell + 2.0) / _radius(domain)
            while f(hi) > 0 and hi < limit:
                hi *= 2.0
            if f(hi) > 0:
                continue
            root = brentq(f, 0.0, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
            found.append((root, (ell, k)))
    if not any(v > 1e-9 for v, _ in found):
        raise BracketError("bracket exhaustion: no positive Steklov eigenvalue", limit=limit)
    found.sort()
    return SteklovSpectrum(values=tuple(v for v, _ in found), modes=tuple(md for _, md in found))


def alpha2(domain: Domain, ell_max: int = 4) -> float:
    return steklov_spectrum(domain, ell_max).alpha2


def neumann_alpha2(domain: Domain, ell_max: int = 4) -> float:
    """Second eigenvalue of the Neumann Laplacian (first nontrivial)."""
    vals = list(eigen_values(assemble(domain, 0.0, "neumann"), 2))
    if domain.kind == "radial" and domain.dim >= 2:
        for ell in range(1, ell_max + 1):
            vals.append(float(eigen_values(assemble(domain, 0.0, "neumann", angular_mode=ell), 1)[0]))
    vals.sort()
    return float(vals[1])


# --------------------------------------------------------------------------
# β₀(m)


def _beta0_peak_route(m: np.ndarray, domain: Domain) -> float:
    """Root of g(α) = max_λ μ₁(λ, α, m), which is decreasing in α."""
    g = lambda al: mu1_peak(m, al, domain)[1]  # noqa: E731
    if g(0.0) <= 0:
        raise ConfigError("β₀ needs max_λ μ₁(λ, 0, m) > 0 (∫m < 0)")
    hi = 10.0 * (alpha2(domain) + 1.0)
    for _ in range(60):
        if g(hi) < 0:
            break
        hi *= 2.0
    else:
        raise BracketError("β₀ bracket expansion failed", last=hi)
    return brentq(g, 0.0, hi, xtol=1e-11, rtol=4 * np.finfo(float).eps)


def _beta0_dual_route(m: np.ndarray, domain: Domain) -> float:
    """inf{∫|∇φ|² : ∫mφ² = 0, ∫_∂Ω φ² = 1} by maximizing over the multiplier ν
    of the constraint ∫mφ² = 0 the smallest Steklov eigenvalue of ``-Δ - ν m``.

    For fixed ν the inner problem is a Dirichlet-to-Neumann eigenproblem on the
    boundary nodes; it is bounded below only while ``-Δ - ν m`` with Dirichlet
    data on ∂Ω is positive definite, which brackets ν.
    """
    bnd = domain.boundary_nodes
    interior = np.setdiff1d(np.arange(domain.n_nodes), bnd)
    bw = domain.boundary_weights

    def stiffness(nu):
        op = assemble(domain, -nu * m, "neumann")
        full = np.diag(op.diag) + np.diag(op.off, 1) + np.diag(op.off, -1)
        return full

    def dirichlet_min(nu):
        op = assemble(domain, -nu * m, "neumann")
        d, e = op.symmetric_bands()
        lo, hi = interior[0], interior[-1] + 1
        return float(eigh_tridiagonal(d[lo:hi], e[lo : hi - 1], eigvals_only=True, select="i", select_range=(0, 0))[0])

    def steklov_min(nu):
        k = stiffness(nu)
        kii = k[np.ix_(interior, interior)]
        kib = k[np.ix_(interior, bnd)]
        schur = k[np.ix_(bnd, bnd)] - kib.T @ np.linalg.solve(kii, kib)
        s = schur / np.sqrt(np.outer(bw, bw))
        return float(np.linalg.eigvalsh(s)[0])

    scale = _lambda_scale(m, domain)
    nu_lo = brentq(dirichlet_min, _expand(dirichlet_min, 0.0, -scale), 0.0, xtol=1e-13)
    nu_hi = brentq(dirichlet_min, 0.0, _expand(dirichlet_min, 0.0, scale), xtol=1e-13)
    pad = 1e-9 * (nu_hi - nu_lo)
    res = minimize_scalar(
        lambda nu: -steklov_min(nu), bounds=(nu_lo + pad, nu_hi - pad), method="bounded", options={"xatol": 1e-12}
    )
    return float(-res.fun)


@dataclass(frozen=True)
class Beta0Result:
    value: float
    peak_route: float
    dual_route: float


def beta0(m, domain: Domain, rtol: float = 1e-3, detail: bool = False):
    """Largest Robin parameter with principal eigenvalues, computed two ways."""
    m = _weights_of(m)
    _require_sign_changing(m)
    if integrate_volume(m, domain) >= 0:
        raise ConfigError("β₀ needs ∫m < 0")
    a = _beta0_peak_route(m, domain)
    b = _beta0_dual_route(m, domain)
    if abs(a - b) > rtol * (1.0 + abs(a)):
        raise SolverError("β₀ routes disagree", peak_route=a, dual_route=b)
    return Beta0Result(a, a, b) if detail else a


# --------------------------------------------------------------------------
# exponential-average constants


def t_from_eigenfunction(a, phi, domain: Domain) -> float:
    """exp(-∫a φ² log φ / ∫a φ²) for a positive φ."""
    a = _weights_of(a)
    phi = np.asarray(phi, dtype=float)
    if np.any(phi <= 0):
        raise DegenerateNormalizationError("eigenfunction is not strictly positive")
    den = integrate_volume(a * phi**2, domain)
    if abs(den) < 1e-10:
        raise DegenerateNormalizationError("degenerate normalization: ∫ a φ² ≈ 0", value=den)
    return math.exp(-integrate_volume(a * phi**2 * np.log(phi), domain) / den)


def t_star(a, domain: Domain) -> float:
    _, phi = sigma1_neumann(a, domain)
    return t_from_eigenfunction(a, phi, domain)


def t_pm(a, alpha: float, domain: Domain) -> tuple[float, float]:
    """(t₊, t₋) built from φ₊₁ and φ₋₁."""
    pair = principal_weighted(a, alpha, domain)
    return t_from_eigenfunction(a, pair.phi_plus, domain), t_from_eigenfunction(a, pair.phi_minus, domain)


# --------------------------------------------------------------------------
# fixed-point spectral radius


def min_shift(spec: ProblemSpec, alpha: float, u) -> float:
    """Smallest admissible c: m_c(u) = c - V(u) > 0 for the linearized potential V."""
    v = linearized_potential(spec, alpha, u)
    return 1.0 + max(0.0, float(np.max(v)))


def fixed_point_sigma1(
    spec: ProblemSpec,
    alpha: float,
    u,
    c: float | None = None,
    band: float = 1e-5,
    max_iter: int = 10_000,
    tol: float = 1e-12,
) -> tuple[float, bool]:
    """Largest eigenvalue σ₁ of ψ ↦ K_Ω(m_c(u) ψ) + K_∂Ω(α ψ) by power iteration.

    Returns ``(σ₁, dichotomy_ok)`` where ``dichotomy_ok`` checks that σ₁ - 1
    and γ₁ have opposite signs (both within ``band`` of zero also passes).
    """
    v = linearized_potential(spec, alpha, u)
    if c is None:
        c = min_shift(spec, alpha, u)
    mc = c - v
    if np.any(mc <= 0):
        raise ConfigError("shift c too small: m_c(u) must be positive", c=c)
    dom = spec.domain
    mode, al = boundary_alpha(spec, alpha)
    lhs = assemble(dom, 0.0, "neumann", shift=c)  # weak K + cW
    rhs_diag = dom.cell_volumes * mc + al * dom.boundary_diag()

    def lhs_apply(x):
        y = lhs.diag * x
        y[:-1] += lhs.off * x[1:]
        y[1:] += lhs.off * x[:-1]
        return y

    psi = np.ones(dom.n_nodes)
    sigma_old = None
    for _ in range(max_iter):
        psi = solve_weak(lhs, rhs_diag * psi)
        psi /= np.max(np.abs(psi))
        sigma = float(psi @ (rhs_diag * psi)) / float(psi @ lhs_apply(psi))
        if sigma_old is not None and abs(sigma - sigma_old) <= tol * abs(sigma):
            break
        sigma_old = sigma
    else:
        raise NoConvergenceError("power iteration did not converge", sigma=sigma)
    gamma1 = linearized_gamma1(spec, alpha, u).value
    if abs(gamma1) <= band or abs(sigma - 1.0) <= band:
        ok = abs(gamma1) <= band and abs(sigma - 1.0) <= max(band, 10 * abs(gamma1)) or (
            abs(gamma1) > band and (sigma > 1.0) == (gamma1 < 0.0)
        )
    else:
        ok = (sigma > 1.0) == (gamma1 < 0.0) and (sigma < 1.0) == (gamma1 > 0.0)
    return sigma, bool(ok)
