"""Artifact serialization (JSON, CSV) and the SVG bifurcation diagram.

All writers are deterministic: JSON keys are sorted, floats use Python's
shortest round-trip repr, and SVG coordinates are printed with a fixed number
of decimals. Files are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .continuation import CSV_COLUMNS, Branch, FoldRecord
from .errors import ConfigError

# --------------------------------------------------------------------------
# plain data and atomic writes


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, tuples and dataclass-like
    records (``as_dict``) to JSON types."""
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan; keep them readable and parseable
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_atomic(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# --------------------------------------------------------------------------
# branch CSV


def branch_csv(branch: Branch) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in branch.csv_rows():
        writer.writerow([repr(float(v)) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def read_branch_csv(path_or_text: str | Path) -> list[list]:
    """Parse a branch CSV back into rows typed like ``Branch.csv_rows``."""
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(text).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_COLUMNS:
        raise ConfigError(f"not a branch CSV: header {rows[0] if rows else None}")
    out = []
    for r in rows[1:]:
        out.append([float(v) for v in r[:6]] + r[6:])
    return out


def branch_summary(branch: Branch) -> dict:
    pts = branch.points
    return {
        "family": branch.family,
        "q": branch.q,
        "reason": branch.reason,
        "n_points": len(pts),
        "n_lower": len(branch.labelled("lower")),
        "n_upper": len(branch.labelled("upper")),
        "max_residual": max(p.residual for p in pts),
        "max_flux_gap": max(p.flux_gap for p in pts),
        "info": branch.info,
        "fold": branch.fold.as_dict() if branch.fold else None,
    }


# --------------------------------------------------------------------------
# SVG diagram

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 24, 52
COLOURS = ("#1f4e9c", "#b2331f", "#2d7d32", "#6a3d9a")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _segments(branch: Branch, fold: FoldRecord | None) -> list[tuple[bool, list[int]]]:
    """Consecutive point runs with a common style, as (stable, indices).

    With a fold the split is by arclength: everything up to the fold point is
    stable, everything after it unstable, and the fold point is shared. Without
    one the stability tag of both segment ends decides.
    """
    pts = branch.points
    if fold is not None:
        s_fold = pts[fold.index].arclength
        stable = [p.arclength <= s_fold for p in pts]
        seg_style = [stable[i + 1] for i in range(len(pts) - 1)]
    else:
        tags = [p.stability == "asymptotically_stable" for p in pts]
        seg_style = [tags[i] and tags[i + 1] for i in range(len(pts) - 1)]
    runs: list[tuple[bool, list[int]]] = []
    for i, st in enumerate(seg_style):
        if runs and runs[-1][0] == st:
            runs[-1][1].append(i + 1)
        else:
            runs.append((st, [i, i + 1]))
    return runs


def render_diagram(branches, folds, path: str | Path | None = None, title: str = "") -> str:
    """α on the abscissa, log10 ‖u‖∞ on the ordinate; solid stable, dashed
    unstable, an open circle at each fold. Returns the SVG text and writes it
    to ``path`` when given."""
    branches = list(branches)
    folds = list(folds) if folds is not None else [None] * len(branches)
    if not branches or not any(b.points for b in branches):
        raise ConfigError("render_diagram needs at least one nonempty branch")
    if len(folds) != len(branches):
        raise ConfigError("one fold record (or None) per branch is required")
    al = np.concatenate([[p.alpha for p in b.points] for b in branches])
    ul = np.concatenate([[math.log10(p.u_max) for p in b.points] for b in branches])
    x0, x1 = 0.0, float(al.max()) * 1.05 or 1.0
    y0, y1 = float(ul.min()), float(ul.max())
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B

    def sx(a):
        return MARGIN_L + (a - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN_T + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<title>{title}</title>')
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{MARGIN_T + ph}" x2="{_fmt(sx(t))}" y2="{MARGIN_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y0, y1):
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_fmt(sy(t))}" x2="{MARGIN_L}" y2="{_fmt(sy(t))}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_fmt(sy(t) + 4)}" text-anchor="end">1e{t:g}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">α</text>')
    out.append(
        f'<text x="16" y="{MARGIN_T + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.2f})">‖u‖∞</text>'
    )
    for k, (br, fold) in enumerate(zip(branches, folds)):
        colour = COLOURS[k % len(COLOURS)]
        pts = br.points
        for stable, idx in _segments(br, fold):
            coords = " ".join(f"{_fmt(sx(pts[i].alpha))},{_fmt(sy(math.log10(pts[i].u_max)))}" for i in idx)
            dash = "" if stable else ' stroke-dasharray="6 4"'
            cls = "stable" if stable else "unstable"
            out.append(f'<polyline class="{cls}" points="{coords}" fill="none" stroke="{colour}" stroke-width="1.6"{dash}/>')
        if fold is not None:
            fp = pts[fold.index]
            out.append(
                f'<circle class="fold" cx="{_fmt(sx(fp.alpha))}" cy="{_fmt(sy(math.log10(fp.u_max)))}" r="4" '
                f'fill="white" stroke="{colour}" stroke-width="1.6"/>'
            )
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        write_atomic(path, text)
    return text
