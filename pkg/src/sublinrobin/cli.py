"""Command-line driver: ``sublinrobin <verb> [--config run.json] [--out dir]
[--override key=value ...]``.

A run is described by one JSON document (``RunConfig``). Every artifact is
computed in memory first and only then written, so a failing run leaves no
partial results behind; solver failures write ``error.json`` alone.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 a check failed in ``check`` mode.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import continuation as ct
from . import nonlinear, spectral
from .domain_grid import build_domain, make_weight
from .elliptic import FAMILIES, ProblemSpec
from .errors import ConfigError, SolverError
from .report import branch_csv, branch_summary, dumps, render_diagram, write_atomic

TASKS = ("solve", "branch", "eigen", "steklov", "check", "q-sweep", "census", "report")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4

DEFAULT_PROBLEM = {
    "family": "P",
    "q": 0.9,
    "domain": {"kind": "interval", "size": 2.0, "dim": 1, "m": 256},
    "weight": {"preset": "cos_shift", "params": {"delta": 0.25}},
}

# every key a task may read, with its default; unknown keys are rejected
DEFAULT_PARAMS = {
    "alpha": None,  # solve/eigen: α (default 0); q-sweep: fixed α (default β₀/2)
    "label": "lower",  # solve: which branch for α > 0
    "lambda": None,  # eigen: evaluate μ_k at this λ as well
    "k": 1,
    "ell_max": 4,
    "q_grid": [0.9, 0.95, 0.99],
    "alpha_grid": None,  # census: default 8 points inside (0.05, 0.95)·α_s
    "n_alpha": 8,
    "multistart_n": 20,
    "seed": 0,
    "newton_tol": 1e-10,
    "fold_band": 1e-3,
    "alpha_min": 1e-3,
}
POSITIVE_PARAMS = ("newton_tol", "fold_band", "alpha_min")


@dataclass
class RunConfig:
    task: str
    problem: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_PROBLEM))
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    out: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("the run configuration must be a JSON object")
        unknown = set(data) - {"task", "problem", "params", "out"}
        if unknown:
            raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
        problem = copy.deepcopy(DEFAULT_PROBLEM)
        for key, val in (data.get("problem") or {}).items():
            if key not in problem:
                raise ConfigError(f"unknown problem key {key!r}")
            if isinstance(problem[key], dict) and isinstance(val, dict):
                merged = dict(problem[key])
                if key == "weight" and "preset" in val and val["preset"] != merged["preset"]:
                    merged["params"] = {}
                merged.update(val)
                problem[key] = merged
            else:
                problem[key] = val
        params = dict(DEFAULT_PARAMS)
        for key, val in (data.get("params") or {}).items():
            if key not in params:
                raise ConfigError(f"unknown parameter {key!r}")
            params[key] = val
        cfg = cls(task=data.get("task", ""), problem=problem, params=params, out=str(data.get("out", "out")))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {"task": self.task, "problem": copy.deepcopy(self.problem), "params": dict(self.params), "out": self.out}

    def dumps(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> RunConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from None
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        pr = self.problem
        if pr["family"] not in ("P", "S"):
            raise ConfigError(f"family must be 'P' or 'S' (R/RS are internal), got {pr['family']!r}")
        q = pr["q"]
        if not isinstance(q, (int, float)) or isinstance(q, bool) or not 0 < q < 1:
            raise ConfigError(f"q must be a number in (0, 1), got {q!r}")
        dom = pr["domain"]
        if set(dom) - {"kind", "size", "dim", "m"}:
            raise ConfigError(f"unknown domain keys {sorted(set(dom) - {'kind', 'size', 'dim', 'm'})}")
        if not isinstance(pr["weight"], dict) or "preset" not in pr["weight"]:
            raise ConfigError("weight needs a preset")
        p = self.params
        for key in POSITIVE_PARAMS:
            if not isinstance(p[key], (int, float)) or not p[key] > 0:
                raise ConfigError(f"{key} must be a positive number, got {p[key]!r}")
        if not isinstance(p["seed"], int) or isinstance(p["seed"], bool):
            raise ConfigError(f"seed must be an integer, got {p['seed']!r}")
        for key in ("multistart_n", "n_alpha", "k", "ell_max"):
            if not isinstance(p[key], int) or p[key] < (0 if key == "ell_max" else 1):
                raise ConfigError(f"{key} must be a positive integer, got {p[key]!r}")
        if p["label"] not in ("lower", "upper"):
            raise ConfigError(f"label must be 'lower' or 'upper', got {p['label']!r}")
        if p["alpha"] is not None and (not isinstance(p["alpha"], (int, float)) or p["alpha"] < 0):
            raise ConfigError(f"alpha must be a nonnegative number, got {p['alpha']!r}")
        if not p["q_grid"] or any(not 0 < float(v) < 1 for v in p["q_grid"]):
            raise ConfigError("q_grid must be a nonempty list of numbers in (0, 1)")
        if p["alpha_grid"] is not None and any(float(v) <= 0 for v in p["alpha_grid"]):
            raise ConfigError("alpha_grid entries must be positive")

    def build(self) -> ProblemSpec:
        pr = self.problem
        d = pr["domain"]
        try:
            domain = build_domain(d.get("kind", "interval"), float(d.get("size", 2.0)), d.get("dim", 1), d.get("m", 256))
            weight = make_weight(pr["weight"]["preset"], pr["weight"].get("params"), domain)
        except (TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad problem description: {exc}") from None
        if pr["family"] not in FAMILIES:
            raise ConfigError(f"unknown family {pr['family']!r}")
        return ProblemSpec(pr["family"], float(pr["q"]), weight, domain)

    def step_control(self) -> ct.StepControl:
        p = self.params
        return ct.StepControl(newton_tol=p["newton_tol"], fold_band=p["fold_band"], alpha_min=p["alpha_min"])


def apply_override(data: dict, item: str) -> None:
    """``a.b.c=value`` with value parsed as JSON when possible."""
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} runs through a non-object")
    node[parts[-1]] = value


# --------------------------------------------------------------------------
# tasks: each returns (artifacts {name: text}, exit code)


def _trace(cfg: RunConfig, spec: ProblemSpec) -> ct.Branch:
    return ct.trace_branch(spec, ctl=cfg.step_control())


def _branch_artifacts(branch: ct.Branch) -> dict:
    return {
        "branch.csv": branch_csv(branch),
        "branch.json": dumps(branch_summary(branch)),
        "fold.json": dumps(branch.fold.as_dict() if branch.fold else None),
    }


def task_solve(cfg, spec):
    alpha = float(cfg.params["alpha"] or 0.0)
    if alpha == 0.0:
        if spec.family == "S":
            raise ConfigError("family S at α = 0 is the same problem as P; use family P")
        rep = nonlinear.solve_uN(spec.weight, spec.q, spec.domain)
        u = rep.solution
        info = rep.as_dict()
        label = "u_N"
    else:
        branch = _trace(cfg, spec)
        label = cfg.params["label"]
        u = ct.solution_at(spec, branch, alpha, label)
        info = {"alpha_s": branch.fold.alpha_s if branch.fold else None}
    g = spectral.linearized_gamma1(spec, alpha, u).value
    out = {
        "alpha": alpha,
        "label": label,
        "x": spec.domain.nodes,
        "u": u,
        "u_max": float(np.max(u)),
        "u_min": float(np.min(u)),
        "gamma1": g,
        "stability": spectral.stability_tag(g),
        "flux_gap": ct.divergence_identity_gap(spec, alpha, u) / ct.flux_scale(spec, alpha, u),
        "info": info,
    }
    out["info"].pop("solution", None)
    return {"solution.json": dumps(out)}, EXIT_OK


def task_branch(cfg, spec):
    return _branch_artifacts(_trace(cfg, spec)), EXIT_OK


def task_report(cfg, spec):
    branch = _trace(cfg, spec)
    arts = _branch_artifacts(branch)
    arts["diagram.svg"] = render_diagram([branch], [branch.fold], title=f"{spec.family}, q = {spec.q:g}")
    return arts, EXIT_OK


def task_eigen(cfg, spec):
    alpha = float(cfg.params["alpha"] or 0.0)
    a, dom, k = spec.a, spec.domain, cfg.params["k"]
    out = {"alpha": alpha, "k": k}
    try:
        b0 = spectral.beta0(spec.weight, dom, detail=True)
        out["beta0"] = {"value": b0.value, "peak_route": b0.peak_route, "dual_route": b0.dual_route}
    except SolverError as exc:
        out["beta0"] = {"error": str(exc)}
    try:
        pair = spectral.principal_weighted(a, alpha, dom)
        out["principal"] = {
            "lambda_minus": pair.lam_minus,
            "lambda_plus": pair.lam_plus,
            "mu1_at_lambda_minus": spectral.mu_value(1, pair.lam_minus, a, alpha, dom),
            "mu1_at_lambda_plus": spectral.mu_value(1, pair.lam_plus, a, alpha, dom),
        }
    except SolverError as exc:
        out["principal"] = {"error": str(exc)}
    lam = cfg.params["lambda"]
    if lam is not None:
        out["mu_k"] = spectral.mu_k(k, float(lam), a, alpha, dom).as_dict()
    return {"eigen.json": dumps(out)}, EXIT_OK


def task_steklov(cfg, spec):
    ell = cfg.params["ell_max"]
    st = spectral.steklov_spectrum(spec.domain, ell)
    out = {
        "alpha2": st.alpha2,
        "values": list(st.values),
        "modes": [list(md) for md in st.modes],
        "neumann_alpha2": spectral.neumann_alpha2(spec.domain, ell),
        "domain": spec.domain.describe(),
    }
    return {"steklov.json": dumps(out)}, EXIT_OK


def task_check(cfg, spec):
    """Conditions plus the branch-level structure they imply; exit 4 if any
    check fails."""
    conds = ct.check_conditions(spec.weight, spec.q, spec.domain, spec.family)
    branch = _trace(cfg, spec)
    fold = branch.fold
    band = cfg.params["fold_band"]
    checks = {}
    key = "hip_s" if spec.family == "S" else "hip"
    checks[key] = conds[key]["holds"]
    checks["single_fold"] = fold is not None
    if fold is not None:
        checks["bend_left"] = bool(fold.bend_left and fold.beta_second < 0)
        bound = ct.alpha_s_upper_bound(spec.weight, spec.q, spec.domain, spec.family, u_n=branch.points[0].u)
        thr = conds["alpha2_neumann" if spec.family == "S" else "alpha2"]
        checks["bound_chain"] = bool(fold.alpha_s <= bound <= thr)
        before = [p.gamma1 for p in branch.points[: fold.index] if p.fold_coordinate is None]
        after = [p.gamma1 for p in branch.points[fold.index + 1 :] if p.fold_coordinate is None]
        checks["gamma1_signs"] = bool(all(g > 0 for g in before) and all(g < 0 for g in after))
    checks["dichotomy"] = all(
        spectral.fixed_point_sigma1(spec, p.alpha, p.u)[1] for p in branch.points if abs(p.gamma1) > band
    )
    checks["flux"] = all(p.flux_gap <= nonlinear.FLUX_TOL for p in branch.points)
    out = {"checks": checks, "passed": all(checks.values()), "conditions": conds, "branch": branch_summary(branch)}
    return {"check.json": dumps(out)}, EXIT_OK if out["passed"] else EXIT_CHECK


def task_q_sweep(cfg, spec):
    alpha = cfg.params["alpha"]
    if alpha is None:
        alpha = 0.5 * spectral.beta0(spec.weight, spec.domain)
    res = ct.q_sweep(spec.weight, float(alpha), cfg.params["q_grid"], spec.domain, spec.family)
    return {"q_sweep.json": dumps(res)}, EXIT_OK


def task_census(cfg, spec):
    branch = _trace(cfg, spec)
    if cfg.params["alpha_grid"] is not None:
        grid = [float(v) for v in cfg.params["alpha_grid"]]
    else:
        if branch.fold is None:
            raise SolverError("no fold on the traced branch; give alpha_grid explicitly")
        grid = ct.census_alpha_grid(branch.fold.alpha_s, cfg.params["n_alpha"])
    recs = ct.two_solution_census(spec, grid, cfg.params["multistart_n"], branch=branch, seed=cfg.params["seed"])
    for r in recs:
        r.pop("solutions")
    out = {
        "alpha_s": branch.fold.alpha_s if branch.fold else None,
        "records": recs,
        "exactly_two_everywhere": all(r["count"] == 2 for r in recs),
        "conditions": ct.check_conditions(spec.weight, spec.q, spec.domain, spec.family, u_n=branch.points[0].u),
    }
    return {"census.json": dumps(out)}, EXIT_OK


TASK_FUNCS = {
    "solve": task_solve,
    "branch": task_branch,
    "eigen": task_eigen,
    "steklov": task_steklov,
    "check": task_check,
    "q-sweep": task_q_sweep,
    "census": task_census,
    "report": task_report,
}


def run(config: RunConfig, out: str | Path | None = None) -> int:
    """Dispatch ``config.task`` and write its artifacts; returns the exit code."""
    out_dir = Path(out if out is not None else config.out)
    try:
        spec = config.build()
        artifacts, code = TASK_FUNCS[config.task](config, spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        diag = {"task": config.task, "error": type(exc).__name__, "message": str(exc), "info": exc.info}
        write_atomic(out_dir / "error.json", dumps(diag))
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    artifacts["config.json"] = config.dumps()
    for name in sorted(artifacts):
        write_atomic(out_dir / name, artifacts[name])
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sublinrobin", description=__doc__.splitlines()[0])
    p.add_argument("verb", choices=TASKS, help="task to run")
    p.add_argument("--config", type=Path, help="JSON run configuration (defaults: canonical problem)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config's 'out')")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a config entry by dotted path, e.g. problem.q=0.95 or params.alpha=0.1")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = {}
        if args.config is not None:
            try:
                data = json.loads(args.config.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError("the run configuration must be a JSON object")
        data["task"] = args.verb
        for item in args.override:
            apply_override(data, item)
        cfg = RunConfig.from_dict(data)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
