"""Experiment configuration: schema, validation, and problem assembly.

Configs are JSON documents validated against CONFIG_SCHEMA; validation
collects every offending key before failing.  Physical invariants
(positivity, CFL, window ordering) are re-checked after parse when the
discrete problem is assembled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import Grid, TimeGrid, boundary_patch, build_region
from .maxwell import EmCoefficients, em_cfl_max_dt, sample_expression
from .wave import CoefficientField, cfl_max_dt

SCHEMA_VERSION = 1

PROBLEMS = ("wave2d", "wave3d", "maxwell3d")
MODES = (
    "localize-space",
    "localize-time-I",
    "localize-time-II",
    "simulate",
    "verify-adjoint",
    "distance-map",
)

# published schema: key -> (required, type description)
CONFIG_SCHEMA = {
    "schema_version": "int, must equal 1",
    "problem": f"one of {PROBLEMS}",
    "mode": f"one of {MODES}",
    "grid": "{n: [int,...], extent: [float,...] (or h), origin?: [float,...]}",
    "time": "{T: float, dt?: float (defaults to the CFL bound), cfl_fraction?: float}",
    "coefficients": "wave: {c: expr, q?: expr}; maxwell: {eps: expr, mu: expr}; "
                    "expr = number or {const: float, bumps: [{center, width, amplitude}]}",
    "gamma": "{faces: ['x-', ...]} or {faces: 'all'}",
    "regions": "{B?: descriptor, D?: descriptor}; descriptor = "
               "{type: ball|box|union, ...}",
    "windows": "{target?: [a, b], suppress?: [c, d]}",
    "localizer": "{k_schedule?: [float,...], beta?: float, tau?: float, "
                 "delta?: float, cg_tol?: float, cg_maxit?: int}",
    "which_field": "E or H (maxwell localization target)",
    "excitation": "{type: zero|gaussian-pulse, t0?, width?, amplitude?} (simulate)",
    "snapshots": "[float, ...] times to dump (simulate / distance-map)",
    "verify": "{trials?: int} (verify-adjoint)",
    "seed": "int",
    "output": "{save_fk?: none|final|all, save_snapshot?: bool}",
}

_TOP_KEYS = set(CONFIG_SCHEMA)

_DEFAULT_LOCALIZER = {
    "k_schedule": [1.0, 10.0, 100.0, 1000.0, 10000.0],
    "beta": 1e-3,
    "tau": None,
    "delta": None,
    "cg_tol": 1e-7,
    "cg_maxit": 800,
}


def schema_text() -> str:
    return json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_expr(problems, key, v):
    if _is_num(v):
        return
    if isinstance(v, dict):
        bad = set(v) - {"const", "bumps"}
        if bad:
            problems.append(f"{key}: unknown expression keys {sorted(bad)}")
        for i, b in enumerate(v.get("bumps", [])):
            if not isinstance(b, dict) or set(b) - {"center", "width", "amplitude"}:
                problems.append(f"{key}.bumps[{i}]: need center/width/amplitude")
        return
    problems.append(f"{key}: expected a number or const/bumps expression")


def _check_descriptor(problems, key, v):
    if not isinstance(v, dict) or "type" not in v:
        problems.append(f"{key}: region descriptor needs a 'type'")
        return
    t = v["type"]
    if t == "ball":
        missing = {"center", "radius"} - set(v)
        if missing:
            problems.append(f"{key}: ball descriptor missing {sorted(missing)}")
    elif t == "box":
        missing = {"lo", "hi"} - set(v)
        if missing:
            problems.append(f"{key}: box descriptor missing {sorted(missing)}")
    elif t == "union":
        for i, p in enumerate(v.get("parts", [])):
            _check_descriptor(problems, f"{key}.parts[{i}]", p)
    else:
        problems.append(f"{key}: unknown region type {t!r}")


def validate_config(raw: dict) -> list[str]:
    """Return the list of schema violations (empty when valid)."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        return ["config root must be a JSON object"]
    unknown = set(raw) - _TOP_KEYS
    for k in sorted(unknown):
        problems.append(f"{k}: unknown top-level key")
    if raw.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"schema_version: must be {SCHEMA_VERSION}")
    problem = raw.get("problem")
    if problem not in PROBLEMS:
        problems.append(f"problem: must be one of {PROBLEMS}")
    mode = raw.get("mode")
    if mode not in MODES:
        problems.append(f"mode: must be one of {MODES}")

    dim = {"wave2d": 2, "wave3d": 3, "maxwell3d": 3}.get(problem)
    grid = raw.get("grid")
    if not isinstance(grid, dict):
        problems.append("grid: required object")
    else:
        n = grid.get("n")
        if not (isinstance(n, list) and all(isinstance(v, int) for v in n)):
            problems.append("grid.n: list of ints required")
        elif dim is not None and len(n) != dim:
            problems.append(f"grid.n: expected {dim} axes for {problem}")
        if "extent" not in grid and "h" not in grid:
            problems.append("grid: needs 'extent' or 'h'")

    time = raw.get("time")
    if not isinstance(time, dict) or not _is_num(time.get("T", None)):
        problems.append("time.T: required number")
    elif time["T"] <= 0:
        problems.append("time.T: must be positive")

    coeff = raw.get("coefficients", {})
    if problem == "maxwell3d":
        for key in ("eps", "mu"):
            if key in coeff:
                _check_expr(problems, f"coefficients.{key}", coeff[key])
    elif problem in ("wave2d", "wave3d"):
        for key in ("c", "q"):
            if key in coeff:
                _check_expr(problems, f"coefficients.{key}", coeff[key])

    gamma = raw.get("gamma")
    if not isinstance(gamma, dict) or "faces" not in gamma:
        problems.append("gamma.faces: required")

    regions = raw.get("regions", {})
    if isinstance(regions, dict):
        for name, desc in regions.items():
            _check_descriptor(problems, f"regions.{name}", desc)
    else:
        problems.append("regions: must be an object")

    windows = raw.get("windows", {})
    if isinstance(windows, dict):
        for name, w in windows.items():
            if name not in ("target", "suppress"):
                problems.append(f"windows.{name}: unknown window")
            elif not (isinstance(w, list) and len(w) == 2 and all(_is_num(v) for v in w)):
                problems.append(f"windows.{name}: expected [start, end]")
            elif not (0 <= w[0] < w[1]):
                problems.append(f"windows.{name}: must satisfy 0 <= start < end")
    else:
        problems.append("windows: must be an object")

    needs_b = mode in ("localize-space", "localize-time-I", "localize-time-II",
                       "verify-adjoint")
    if needs_b and "B" not in regions:
        problems.append("regions.B: required for this mode")
    if mode == "localize-space" and "D" not in regions:
        problems.append("regions.D: required for localize-space")
    if mode in ("localize-space", "localize-time-I", "localize-time-II",
                "verify-adjoint") and "target" not in windows:
        problems.append("windows.target: required for this mode")
    if mode in ("localize-time-I", "localize-time-II") and "suppress" not in windows:
        problems.append("windows.suppress: required for time localization")
    wf = raw.get("which_field", "E")
    if wf not in ("E", "H"):
        problems.append("which_field: must be E or H")
    exc = raw.get("excitation", {"type": "zero"})
    if not isinstance(exc, dict) or exc.get("type", "zero") not in ("zero", "gaussian-pulse"):
        problems.append("excitation.type: zero or gaussian-pulse")
    if not isinstance(raw.get("seed", 0), int):
        problems.append("seed: must be an int")
    out = raw.get("output", {})
    if isinstance(out, dict):
        if out.get("save_fk", "final") not in ("none", "final", "all"):
            problems.append("output.save_fk: none, final, or all")
        if not isinstance(out.get("save_snapshot", True), bool):
            problems.append("output.save_snapshot: must be a boolean")
        bad = set(out) - {"save_fk", "save_snapshot"}
        for k in sorted(bad):
            problems.append(f"output.{k}: unknown key")
    else:
        problems.append("output: must be an object")
    return problems


@dataclass
class Problem:
    """Assembled discrete problem shared by all CLI modes."""

    kind: str
    mode: str
    grid: Grid
    timegrid: TimeGrid
    gamma: object
    coeff: object  # CoefficientField or EmCoefficients
    regions: dict
    windows: dict
    localizer: dict
    which_field: str
    excitation: dict
    snapshots: list
    verify: dict
    seed: int
    output: dict
    raw: dict = field(repr=False, default=None)

    @property
    def is_maxwell(self) -> bool:
        return self.kind == "maxwell3d"

    def speed_nodes(self) -> np.ndarray:
        if self.is_maxwell:
            return self.coeff.speed_at_nodes(self.grid)
        return self.coeff.c


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from exc
    problems = validate_config(raw)
    if problems:
        raise ConfigError(problems)
    return raw


def build_problem(raw: dict) -> Problem:
    """Turn a validated config into grid/time/coefficient objects,
    re-checking the physical invariants."""
    problems: list[str] = []
    g = raw["grid"]
    n = tuple(g["n"])
    if "h" in g:
        h = tuple(float(v) for v in g["h"])
    else:
        h = tuple(float(e) / ni for e, ni in zip(g["extent"], n))
    origin = tuple(g.get("origin", (0.0,) * len(n)))
    grid = Grid(n=n, h=h, origin=origin)

    coeff_raw = raw.get("coefficients", {})
    if raw["problem"] == "maxwell3d":
        coeff = EmCoefficients.from_expressions(
            grid, coeff_raw.get("eps", 1.0), coeff_raw.get("mu", 1.0)
        )
        dt_max = em_cfl_max_dt(grid, coeff)
    else:
        pts = grid.node_coords()
        c = sample_expression(coeff_raw.get("c", 1.0), pts)
        q = sample_expression(coeff_raw.get("q", 0.0), pts)
        coeff = CoefficientField(c=c, q=q)
        dt_max = cfl_max_dt(grid, coeff)

    t = raw["time"]
    T = float(t["T"])
    frac = float(t.get("cfl_fraction", 1.0))
    dt = t.get("dt")
    if dt is None:
        nt = int(np.ceil(T / (dt_max * frac)))
        dt = T / nt
    else:
        dt = float(dt)
        if dt > dt_max * (1 + 1e-12):
            problems.append(
                f"time.dt: {dt:g} violates the stability bound {dt_max:g}"
            )
        nt = int(round(T / dt))
        if abs(nt * dt - T) > 1e-9 * T:
            problems.append("time.dt: must divide time.T evenly")
    if problems:
        raise ConfigError(problems)
    timegrid = TimeGrid(nt=nt, dt=dt)

    gamma = boundary_patch(grid, raw["gamma"]["faces"])
    regions = {
        name: build_region(grid, desc) for name, desc in raw.get("regions", {}).items()
    }
    windows = {k: tuple(v) for k, v in raw.get("windows", {}).items()}
    for name, w in windows.items():
        if w[1] > T + 1e-12:
            raise ConfigError([f"windows.{name}: end {w[1]} exceeds time.T = {T}"])
    localizer = dict(_DEFAULT_LOCALIZER)
    localizer.update(raw.get("localizer", {}))
    return Problem(
        kind=raw["problem"],
        mode=raw["mode"],
        grid=grid,
        timegrid=timegrid,
        gamma=gamma,
        coeff=coeff,
        regions=regions,
        windows=windows,
        localizer=localizer,
        which_field=raw.get("which_field", "E"),
        excitation=raw.get("excitation", {"type": "zero"}),
        snapshots=list(raw.get("snapshots", [])),
        verify=dict(raw.get("verify", {})),
        seed=int(raw.get("seed", 0)),
        output=dict(raw.get("output", {})),
        raw=raw,
    )
