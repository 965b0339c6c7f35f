"""Discrete operators for the three problem families.

Every operator is stored in its *weak* symmetric tridiagonal form

    L = K + diag(W (V + c)) - α B

with ``K`` the finite-volume stiffness matrix, ``W`` the cell volumes, ``V`` a
nodal potential, ``c`` a constant shift and ``B`` the diagonal boundary mass.
The nodal ("strong") operator approximating ``-Δ + V + c`` is ``A = W⁻¹ L``;
its symmetrization ``W^{1/2} A W^{-1/2}`` is what the eigensolvers see.

On an interval the boundary rows of ``A`` coincide with second-order ghost-node
elimination of ``∂_ν u = α u`` (``-u'(0) = α u(0)``, ``u'(L) = α u(L)``). On a
ball the centre row reduces to ``-N u''(0)`` for the axisymmetric mode; modes
with angular index ℓ ≥ 1 pin ``u(0) = 0`` and drop the centre node.

Families (nodal residuals):

    P   A_α u - a u^q                   Robin(α)
    S   A_0 u - α u - a u^q             Neumann
    R   A_α w - α a w^q                 Robin(α),  w = α^{1/(1-q)} u
    RS  A_0 w - α w - α a w^q           Neumann,   the same rescaling of S
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import lapack

from .domain_grid import Domain, Weight, integrate_boundary, integrate_volume
from .errors import ConfigError, PositivityGuardError, SingularOperatorError

FAMILIES = ("P", "S", "R", "RS")
NEUMANN_FAMILIES = ("S", "RS")
RESCALED = {"P": "R", "S": "RS"}
POSITIVITY_GUARD = 1e-10
PIVOT_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    family: str
    q: float
    weight: Weight
    domain: Domain

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not 0.0 < self.q < 1.0:
            raise ConfigError(f"q must lie strictly inside (0, 1), got {self.q}")
        if np.shape(self.weight.values) != (self.domain.n_nodes,):
            raise ConfigError("weight and domain grids do not match")

    @property
    def a(self) -> np.ndarray:
        return self.weight.values

    def with_family(self, family: str) -> ProblemSpec:
        return replace(self, family=family)

    def with_q(self, q: float) -> ProblemSpec:
        return replace(self, q=q)

    def with_weight(self, weight: Weight) -> ProblemSpec:
        return replace(self, weight=weight)


@dataclass(frozen=True, eq=False)
class LinearOperator:
    domain: Domain
    diag: np.ndarray  # weak form, active nodes only
    off: np.ndarray
    weights: np.ndarray  # cell volumes of the active nodes
    boundary_mode: str
    alpha: float
    angular_mode: int
    shift: float
    offset: int  # 1 when the centre node is pinned (ℓ ≥ 1)

    @property
    def size(self) -> int:
        return self.diag.size

    def strong_bands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(sub, diag, super) diagonals of the nodal operator A = W⁻¹L."""
        w = self.weights
        return self.off / w[1:], self.diag / w, self.off / w[:-1]

    def symmetric_bands(self) -> tuple[np.ndarray, np.ndarray]:
        """(diag, off) of W^{1/2} A W^{-1/2}."""
        w = self.weights
        return self.diag / w, self.off / np.sqrt(w[:-1] * w[1:])

    def dense(self) -> np.ndarray:
        sub, d, sup = self.strong_bands()
        return np.diag(d) + np.diag(sub, -1) + np.diag(sup, 1)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        """Nodal ``A u`` for a full-length field (pinned node maps to 0)."""
        v = self.restrict(u)
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return self.extend(out / self.weights)

    def restrict(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape == (self.size,):
            return u.copy()
        if u.shape != (self.domain.n_nodes,):
            raise ValueError(f"field of shape {u.shape} does not fit operator of size {self.size}")
        return u[self.offset :].copy()

    def extend(self, v: np.ndarray) -> np.ndarray:
        if self.offset == 0:
            return v
        return np.concatenate((np.zeros(self.offset), v))

    def with_potential(self, extra: np.ndarray) -> LinearOperator:
        """Add a nodal potential (full-length field) to the operator."""
        extra = np.asarray(extra, dtype=float)
        return replace(self, diag=self.diag + self.weights * extra[self.offset :])


def _check_potential(potential, domain: Domain) -> np.ndarray:
    v = np.asarray(potential, dtype=float)
    if v.ndim == 0:
        v = np.full(domain.n_nodes, float(v))
    if v.shape != (domain.n_nodes,):
        raise ValueError("potential does not match the grid")
    if not np.all(np.isfinite(v)):
        raise ValueError("potential is not finite")
    return v


def assemble(
    domain: Domain,
    potential=0.0,
    boundary_mode: str = "neumann",
    alpha: float = 0.0,
    angular_mode: int = 0,
    shift: float = 0.0,
    require_definite: bool = False,
) -> LinearOperator:
    """Weak tridiagonal form of ``-Δ + V + shift`` with Neumann or Robin(α) closure."""
    if boundary_mode not in ("neumann", "robin"):
        raise ConfigError(f"boundary_mode must be 'neumann' or 'robin', got {boundary_mode!r}")
    if boundary_mode == "neumann":
        alpha = 0.0
    ell = int(angular_mode)
    if ell < 0:
        raise ConfigError("angular mode must be >= 0")
    if ell > 0 and domain.kind != "radial":
        raise ConfigError("angular modes ℓ > 0 only exist on radial domains")
    if ell > 0 and domain.dim < 2:
        raise ConfigError("angular modes ℓ > 0 need dim >= 2")
    if require_definite and shift < 0:
        raise ConfigError("a definite operator was requested with a negative shift")

    v = _check_potential(potential, domain) + shift
    h = domain.h
    flux = domain.face_areas / h
    w = np.asarray(domain.cell_volumes)
    diag = w * v
    diag[:-1] += flux
    diag[1:] += flux
    off = -flux.copy()
    if ell > 0:
        r = domain.nodes[1:]
        diag[1:] += w[1:] * ell * (ell + domain.dim - 2) / r**2
    diag[domain.boundary_nodes] -= alpha * domain.boundary_weights
    offset = 1 if ell > 0 else 0
    return LinearOperator(
        domain=domain,
        diag=diag[offset:],
        off=off[offset:],
        weights=w[offset:].copy(),
        boundary_mode=boundary_mode,
        alpha=float(alpha),
        angular_mode=ell,
        shift=float(shift),
        offset=offset,
    )


def _factor(op: LinearOperator):
    dl, d, du = op.off.copy(), op.diag.copy(), op.off.copy()
    dl, d, du, du2, ipiv, info = lapack.dgttrf(dl, d, du)
    scale = np.max(np.abs(op.diag)) + np.max(np.abs(op.off), initial=0.0)
    if info > 0 or np.min(np.abs(d)) <= PIVOT_TOL * scale:
        raise SingularOperatorError("operator singular", min_pivot=float(np.min(np.abs(d))), scale=float(scale))
    return dl, d, du, du2, ipiv


def solve_weak(op: LinearOperator, b: np.ndarray) -> np.ndarray:
    """Solve ``L x = b`` on the active nodes (b already in weak form)."""
    factors = _factor(op)
    x, info = lapack.dgttrs(*factors, np.asarray(b, dtype=float))
    return x


def solve_linear(op: LinearOperator, rhs) -> np.ndarray:
    """Nodal solve ``A u = rhs``; returns a full-length field."""
    if np.ndim(rhs) == 0 or np.size(rhs) == op.domain.n_nodes:
        f = op.restrict(_check_potential(rhs, op.domain))
    else:
        f = np.asarray(rhs, dtype=float)
    return op.extend(solve_weak(op, op.weights * f))


def apply_K_Omega(c: float, g, domain: Domain) -> np.ndarray:
    """Solution of ``(-Δ + c) u = g`` with ``∂_ν u = 0``."""
    if not c > 0:
        raise ConfigError(f"K_Ω needs c > 0, got {c}")
    return solve_linear(assemble(domain, 0.0, "neumann", shift=c), g)


def boundary_data(h, domain: Domain) -> np.ndarray:
    """Accept per-boundary-node data or a full field (its trace is taken)."""
    h = np.asarray(h, dtype=float)
    nb = domain.boundary_nodes.size
    if h.ndim == 0:
        return np.full(nb, float(h))
    if h.shape == (domain.n_nodes,):
        return h[domain.boundary_nodes]
    if h.shape != (nb,):
        raise ValueError(f"boundary data must have {nb} entries")
    return h


def apply_K_boundary(c: float, h, domain: Domain) -> np.ndarray:
    """Solution of ``(-Δ + c) u = 0`` with ``∂_ν u = h``."""
    if not c > 0:
        raise ConfigError(f"K_∂Ω needs c > 0, got {c}")
    op = assemble(domain, 0.0, "neumann", shift=c)
    b = np.zeros(domain.n_nodes)
    b[domain.boundary_nodes] = domain.boundary_weights * boundary_data(h, domain)
    return solve_weak(op, b)


def fixed_point_map(spec: ProblemSpec, alpha: float, u: np.ndarray, c: float) -> np.ndarray:
    """F_c(u) = K_Ω(c u + a u^q) + K_∂Ω(α u) (family S: K_Ω((c + α) u + a u^q))."""
    a, q = spec.a, spec.q
    u = np.asarray(u, dtype=float)
    if spec.family == "S":
        return apply_K_Omega(c, (c + alpha) * u + a * u**q, spec.domain)
    if spec.family == "RS":
        return apply_K_Omega(c, (c + alpha) * u + alpha * a * u**q, spec.domain)
    if spec.family == "R":
        return apply_K_Omega(c, c * u + alpha * a * u**q, spec.domain) + apply_K_boundary(c, alpha * u, spec.domain)
    return apply_K_Omega(c, c * u + a * u**q, spec.domain) + apply_K_boundary(c, alpha * u, spec.domain)


# --------------------------------------------------------------------------
# nonlinear residuals and linearizations


def check_positive(u: np.ndarray, guard: float = POSITIVITY_GUARD) -> None:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise PositivityGuardError("positivity guard: non-finite field")
    top = np.max(np.abs(u))
    if top == 0.0 or np.min(u) <= guard * top:
        raise PositivityGuardError(
            "positivity guard: field not strictly positive", min=float(np.min(u)), max=float(top)
        )


def linear_part(spec: ProblemSpec, alpha: float) -> LinearOperator:
    """The linear operator acting on u in the family's residual."""
    if spec.family in NEUMANN_FAMILIES:
        return assemble(spec.domain, -alpha, "neumann")
    return assemble(spec.domain, 0.0, "robin", alpha=alpha)


def source(spec: ProblemSpec, alpha: float, u: np.ndarray) -> np.ndarray:
    """Nonlinear source term: a u^q (P, S) or α a w^q (R, RS)."""
    f = spec.a * np.asarray(u) ** spec.q
    return alpha * f if spec.family in ("R", "RS") else f


def residual(spec: ProblemSpec, alpha: float, u, guard: bool = True) -> tuple[np.ndarray, float]:
    """Nodal residual of the family's equation and its sup-norm."""
    u = np.asarray(u, dtype=float)
    if guard:
        check_positive(u)
    r = linear_part(spec, alpha).matvec(u) - source(spec, alpha, u)
    return r, float(np.max(np.abs(r)))


def residual_scale(spec: ProblemSpec, alpha: float, u) -> float:
    """Natural magnitude of the equation's terms, for relative tolerances."""
    u = np.asarray(u, dtype=float)
    top = float(np.max(np.abs(u)))
    s = float(np.max(np.abs(source(spec, alpha, u))))
    if spec.family in NEUMANN_FAMILIES:
        s = max(s, abs(alpha) * top)
    return max(s, np.finfo(float).tiny)


def rounding_floor(spec: ProblemSpec, alpha: float, u) -> float:
    """Residual level below which rounding in A u dominates."""
    op = linear_part(spec, alpha)
    _, d, _ = op.strong_bands()
    return 16 * np.finfo(float).eps * 2.0 * float(np.max(np.abs(d))) * float(np.max(np.abs(u)))


def linearized_potential(spec: ProblemSpec, alpha: float, u) -> np.ndarray:
    """V such that the Jacobian equals ``A_bc + V`` (A_bc Robin(α) or Neumann)."""
    u = np.asarray(u, dtype=float)
    check_positive(u)
    q, a = spec.q, spec.a
    v = -q * a * u ** (q - 1.0)
    if spec.family == "R":
        return alpha * v
    if spec.family == "RS":
        return alpha * v - alpha
    if spec.family == "S":
        return v - alpha
    return v


def boundary_alpha(spec: ProblemSpec, alpha: float) -> tuple[str, float]:
    if spec.family in NEUMANN_FAMILIES:
        return "neumann", 0.0
    return "robin", float(alpha)


def jacobian(spec: ProblemSpec, alpha: float, u) -> LinearOperator:
    mode, al = boundary_alpha(spec, alpha)
    return assemble(spec.domain, linearized_potential(spec, alpha, u), mode, alpha=al)


def d_residual_d_alpha(spec: ProblemSpec, alpha: float, u) -> np.ndarray:
    """∂F/∂α at fixed u (nodal)."""
    u = np.asarray(u, dtype=float)
    dom = spec.domain
    bnd = dom.boundary_diag() / dom.cell_volumes
    if spec.family == "S":
        return -u
    if spec.family == "RS":
        return -u - spec.a * u**spec.q
    if spec.family == "R":
        return -bnd * u - spec.a * u**spec.q
    return -bnd * u


def divergence_identity_gap(spec: ProblemSpec, alpha: float, u) -> float:
    """Integral of the equation over Ω; vanishes at every solution.

    P: ∫a u^q + α∫_∂Ω u,  S: ∫(α u + a u^q),  R: α(∫a w^q + ∫_∂Ω w),
    RS: α(∫a w^q + ∫w).
    """
    u = np.asarray(u, dtype=float)
    dom = spec.domain
    au = integrate_volume(spec.a * np.maximum(u, 0.0) ** spec.q, dom)
    if spec.family == "S":
        return au + alpha * integrate_volume(u, dom)
    if spec.family == "RS":
        return alpha * (au + integrate_volume(u, dom))
    gap = au + alpha * integrate_boundary(u, dom)
    return alpha * gap if spec.family == "R" else gap


def flux_scale(spec: ProblemSpec, alpha: float, u) -> float:
    u = np.asarray(u, dtype=float)
    dom = spec.domain
    top = float(np.max(np.abs(u)))
    s = float(np.max(np.abs(spec.a))) * top**spec.q * dom.volume
    bmeas = dom.volume if spec.family in NEUMANN_FAMILIES else dom.boundary_measure
    s += abs(alpha) * top * bmeas
    if spec.family in ("R", "RS"):
        s *= abs(alpha)
    return s


def p_to_r(alpha: float, u, q: float) -> np.ndarray:
    """w = α^{1/(1-q)} u."""
    return alpha ** (1.0 / (1.0 - q)) * np.asarray(u, dtype=float)


def r_to_p(alpha: float, w, q: float) -> np.ndarray:
    return alpha ** (-1.0 / (1.0 - q)) * np.asarray(w, dtype=float)
