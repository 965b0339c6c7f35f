"""Grids, quadrature and weight presets.

Two geometries are supported: the interval ``(0, L)`` and the ball ``B_R`` in
``R^N`` reduced to its radial coordinate. Both use a uniform node set
``x_0 = 0 < ... < x_m = size`` and a finite-volume cell around every node;
the cell volumes are the quadrature weights. On an interval the cells are the
usual trapezoid weights (``h/2`` at the ends, ``h`` inside). On a ball each
cell is the spherical shell ``[r_i - h/2, r_i + h/2] ∩ [0, R]`` measured with
the volume element ``N ω_N r^(N-1) dr``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError

MIN_INTERVALS = 16


def unit_ball_volume(dim: int) -> float:
    """Volume ω_N of the unit ball, via ω_N = ω_{N-2} 2π/N."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    omega = {0: 1.0, 1: 2.0}
    for n in range(2, dim + 1):
        omega[n] = omega[n - 2] * 2.0 * math.pi / n
    return omega[dim]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Domain:
    kind: str
    size: float
    dim: int
    m: int
    nodes: np.ndarray
    cell_volumes: np.ndarray
    face_areas: np.ndarray  # area of the cell face between node i and i+1
    boundary_measure: float

    @property
    def h(self) -> float:
        return self.size / self.m

    @property
    def n_nodes(self) -> int:
        return self.m + 1

    @property
    def volume(self) -> float:
        return float(self.cell_volumes.sum())

    @property
    def boundary_nodes(self) -> np.ndarray:
        if self.kind == "interval":
            return np.array([0, self.m])
        return np.array([self.m])

    @property
    def boundary_weights(self) -> np.ndarray:
        """Weights of the boundary nodes in ∫_{∂Ω} (one per boundary node)."""
        if self.kind == "interval":
            return np.array([1.0, 1.0])
        return np.array([self.boundary_measure])

    def boundary_diag(self) -> np.ndarray:
        """Nodal vector of boundary weights (zero away from ∂Ω)."""
        out = np.zeros(self.n_nodes)
        out[self.boundary_nodes] = self.boundary_weights
        return out

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "size": self.size, "dim": self.dim, "m": self.m}

    def refined(self, factor: int = 2) -> Domain:
        return build_domain(self.kind, self.size, self.dim, self.m * factor)


def build_domain(kind: str, size: float, dim: int = 1, m: int = 256) -> Domain:
    """Uniform grid on ``(0, size)`` (interval) or ``[0, size]`` in r (ball)."""
    if kind not in ("interval", "radial"):
        raise ConfigError(f"unknown domain kind {kind!r}")
    if not size > 0:
        raise ConfigError(f"domain size must be positive, got {size}")
    if int(m) != m or m < MIN_INTERVALS:
        raise ConfigError(f"grid resolution must be an integer >= {MIN_INTERVALS}, got {m}")
    if int(dim) != dim or dim < 1:
        raise ConfigError(f"dimension must be a positive integer, got {dim}")
    if kind == "interval" and dim != 1:
        raise ConfigError("interval domains are one-dimensional (dim=1)")
    m, dim, size = int(m), int(dim), float(size)

    nodes = np.linspace(0.0, size, m + 1)
    h = size / m
    faces = 0.5 * (nodes[:-1] + nodes[1:])
    if kind == "interval":
        vols = np.full(m + 1, h)
        vols[0] = vols[-1] = 0.5 * h
        face_areas = np.ones(m)
        bmeas = 2.0
    else:
        omega = unit_ball_volume(dim)
        lo = np.concatenate(([0.0], faces))
        hi = np.concatenate((faces, [size]))
        vols = omega * (hi**dim - lo**dim)
        face_areas = dim * omega * faces ** (dim - 1)
        bmeas = dim * omega * size ** (dim - 1)
    return Domain(
        kind=kind,
        size=size,
        dim=dim,
        m=m,
        nodes=_frozen(nodes),
        cell_volumes=_frozen(vols),
        face_areas=_frozen(face_areas),
        boundary_measure=float(bmeas),
    )


def _check_field(f, domain: Domain) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        f = np.full(domain.n_nodes, float(f))
    if f.shape != (domain.n_nodes,):
        raise ValueError(f"field has shape {f.shape}, domain has {domain.n_nodes} nodes")
    return f


def integrate_volume(f, domain: Domain) -> float:
    """∫_Ω f with the domain's cell-volume quadrature."""
    return float(np.dot(domain.cell_volumes, _check_field(f, domain)))


def integrate_boundary(f, domain: Domain) -> float:
    """∫_{∂Ω} f: ``f(0) + f(L)`` on an interval, ``|∂B_R| f(R)`` on a ball."""
    f = _check_field(f, domain)
    return float(np.dot(domain.boundary_weights, f[domain.boundary_nodes]))


# --------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightStats:
    integral: float
    integral_pos: float
    integral_neg: float
    c_a: float | None  # ∫a⁻ / ∫a⁺, None when a⁺ ≡ 0
    sign_changing: bool
    positivity_components: tuple[tuple[int, int], ...]  # inclusive node ranges
    a0_holds: bool  # ∫a < 0

    def as_dict(self) -> dict[str, Any]:
        return {
            "integral": self.integral,
            "integral_pos": self.integral_pos,
            "integral_neg": self.integral_neg,
            "C_a": self.c_a,
            "sign_changing": self.sign_changing,
            "positivity_components": [list(c) for c in self.positivity_components],
            "A0_holds": self.a0_holds,
        }


@dataclass(frozen=True, eq=False)
class Weight:
    values: np.ndarray
    preset: str
    params: dict = field(default_factory=dict)
    stats: WeightStats | None = None

    def scaled(self, c: float, domain: Domain) -> Weight:
        return weight_from_values(c * self.values, domain, preset="scaled", params={"c": c, "base": self.preset})


def positivity_components(values: np.ndarray) -> tuple[tuple[int, int], ...]:
    pos = np.asarray(values) > 0.0
    comps = []
    start = None
    for i, p in enumerate(pos):
        if p and start is None:
            start = i
        elif not p and start is not None:
            comps.append((start, i - 1))
            start = None
    if start is not None:
        comps.append((start, len(pos) - 1))
    return tuple(comps)


def weight_stats(w: Weight | np.ndarray, domain: Domain) -> WeightStats:
    values = _check_field(w.values if isinstance(w, Weight) else w, domain)
    ipos = integrate_volume(np.maximum(values, 0.0), domain)
    ineg = integrate_volume(np.maximum(-values, 0.0), domain)
    total = integrate_volume(values, domain)
    sign_changing = bool(np.any(values > 0.0) and np.any(values < 0.0))
    return WeightStats(
        integral=total,
        integral_pos=ipos,
        integral_neg=ineg,
        c_a=(ineg / ipos) if ipos > 0.0 else None,
        sign_changing=sign_changing,
        positivity_components=positivity_components(values),
        a0_holds=total < 0.0,
    )


def weight_from_values(values, domain: Domain, preset: str = "values", params: dict | None = None) -> Weight:
    values = _frozen(_check_field(values, domain).copy())
    if not np.all(np.isfinite(values)):
        raise ConfigError("weight is not finite on the grid")
    return Weight(values=values, preset=preset, params=dict(params or {}), stats=weight_stats(values, domain))


def read_weight_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column CSV ``x, a(x)``; a non-numeric first row is taken as a header."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                if xs:
                    raise ConfigError(f"malformed weight CSV row {row!r}") from None
                continue
            xs.append(x)
            ys.append(y)
    if len(xs) < 2:
        raise ConfigError("weight CSV needs at least two samples")
    x = np.asarray(xs)
    order = np.argsort(x)
    return x[order], np.asarray(ys)[order]


def make_weight(preset: str, params: dict | None, domain: Domain) -> Weight:
    """Build one of the example weights on ``domain``.

    Presets:
      ``cos_shift``      a = cos(π x/ℓ) − δ, params ``delta`` and optional ``ell``
                         (default size/2, one full period on the domain)
      ``k_split``        k a⁺ − a⁻ for a base weight, params ``k`` and ``base``
                         (a Weight, or a dict ``{"preset": ..., "params": ...}``)
      ``radial_annulus`` inner_level on r ≤ R0, outer_level on r > R0
      ``constant``       a ≡ value
      ``tabulated``      linear interpolation of ``x``/``a`` samples or a CSV ``path``
    """
    params = dict(params or {})
    x = domain.nodes
    if preset == "cos_shift":
        delta = float(params.get("delta", 0.25))
        ell = float(params.get("ell", domain.size / 2.0))
        if ell <= 0:
            raise ConfigError("cos_shift needs ell > 0")
        values = np.cos(np.pi * x / ell) - delta
        params = {"delta": delta, "ell": ell}
    elif preset == "k_split":
        k = float(params.get("k", 1.0))
        if not k > 0:
            raise ConfigError(f"k_split needs k > 0, got {k}")
        base = params.get("base")
        if base is None:
            raise ConfigError("k_split needs a base weight")
        if not isinstance(base, Weight):
            base = make_weight(base["preset"], base.get("params"), domain)
        b = np.asarray(base.values)
        values = k * np.maximum(b, 0.0) - np.maximum(-b, 0.0)
        params = {"k": k, "base": {"preset": base.preset, "params": _jsonable(base.params)}}
    elif preset == "radial_annulus":
        if domain.kind != "radial":
            raise ConfigError("radial_annulus needs a radial domain")
        r0 = float(params["R0"])
        inner = float(params.get("inner_level", -1.0))
        outer = float(params.get("outer_level", 0.5))
        if not 0.0 < r0 < domain.size:
            raise ConfigError(f"R0 must lie in (0, R), got {r0}")
        if inner > 0 or outer <= 0:
            raise ConfigError("radial_annulus needs inner_level <= 0 < outer_level")
        values = np.where(x <= r0, inner, outer)
        params = {"R0": r0, "inner_level": inner, "outer_level": outer}
    elif preset == "constant":
        values = np.full(domain.n_nodes, float(params.get("value", -1.0)))
    elif preset == "tabulated":
        if "path" in params:
            xs, ys = read_weight_csv(params["path"])
        else:
            xs = np.asarray(params["x"], dtype=float)
            ys = np.asarray(params["a"], dtype=float)
        if xs[0] > x[0] + 1e-12 or xs[-1] < x[-1] - 1e-12:
            raise ConfigError("tabulated weight does not cover the domain")
        values = np.interp(x, xs, ys)
    else:
        raise ConfigError(f"unknown weight preset {preset!r}")
    return weight_from_values(values, domain, preset=preset, params=params)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Weight):
        return {"preset": obj.preset, "params": _jsonable(obj.params)}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
