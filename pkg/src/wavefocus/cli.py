"""Command-line driver: one experiment per invocation.

    wavefocus <mode> --config cfg.json --out outdir [--seed S] [--threads N]
                     [--strict-reproducible]

Modes: localize-space, localize-time-I, localize-time-II, simulate,
verify-adjoint, distance-map; plus print-schema.  Exit codes: 0 ok,
2 config error, 3 feasibility error, 4 numerical error.

Artifacts per run: report.json (all norms, parameters, feasibility
echoes, snapped times, software version), field snapshots and boundary
data in the WFOC1 container (CSV alternative for 2D slices), and a per-k
norms CSV for the localization modes.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import MODES, Problem, build_problem, load_config, schema_text
from .errors import ConfigError, FeasibilityError, WavefocusError
from .fields_io import write_csv_slice, write_field, write_norms_csv
from .geometry import travel_time_map
from .linops import LocalizerConfig, dot_test
from .wave import SpaceTimeWindow, forward_wave, make_L_op, make_P_op, make_T_op
from .wave_localize import (
    localize_space,
    localize_time_case1,
    localize_time_case2,
)


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_report(outdir: Path, payload: dict) -> Path:
    path = outdir / "report.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _base_report(problem: Problem, strict: bool) -> dict:
    return {
        "software_version": __version__,
        "schema_version": problem.raw.get("schema_version"),
        "problem": problem.kind,
        "mode": problem.mode,
        "seed": problem.seed,
        "strict_reproducible": strict,
        "config_echo": problem.raw,
        "grid": {"n": list(problem.grid.n), "h": list(problem.grid.h),
                 "origin": list(problem.grid.origin)},
        "time": {"nt": problem.timegrid.nt, "dt": problem.timegrid.dt,
                 "T": problem.timegrid.T},
        "timestamp": _timestamp(),
    }


def _localizer_cfg(problem: Problem) -> LocalizerConfig:
    loc = problem.localizer
    return LocalizerConfig(
        k_schedule=loc["k_schedule"],
        cg_tol=loc["cg_tol"],
        cg_maxit=loc["cg_maxit"],
    )


def _save_fks(problem: Problem, outdir: Path, report, fks) -> list[str]:
    mode = problem.output.get("save_fk", "final")
    if mode == "none":
        return []
    picks = range(len(fks)) if mode == "all" else [len(fks) - 1]
    files = []
    for i in picks:
        k = report.ks[i]
        if problem.is_maxwell:
            from .maxwell import em_boundary_space

            space = em_boundary_space(problem.grid, problem.timegrid, problem.gamma)
            series = space.with_zero_start(fks[i])
        else:
            series = fks[i].reshape(problem.timegrid.nt + 1, problem.gamma.num_nodes)
        name = f"f_k_{k:g}.wfoc"
        write_field(outdir / name, series, time_index=-1)
        files.append(name)
    return files


def _run_localize(problem: Problem, outdir: Path) -> dict:
    cfg = _localizer_cfg(problem)
    loc = problem.localizer
    mode = problem.mode
    if problem.is_maxwell:
        from .maxwell_localize import (
            EmXiRecipe,
            localize_space_em,
            localize_time_em_case1,
            localize_time_em_case2,
        )

        recipe = EmXiRecipe(
            which_field=problem.which_field,
            tau=loc["tau"],
            beta=loc["beta"],
            cg_tol=loc["cg_tol"],
            cg_maxit=loc["cg_maxit"],
        )
        if mode == "localize-space":
            win = SpaceTimeWindow(problem.regions["B"], problem.windows["target"])
            report, fks = localize_space_em(
                problem.which_field, win, problem.regions["D"], problem.gamma,
                problem.coeff, problem.grid, problem.timegrid, cfg=cfg, recipe=recipe,
            )
        elif mode == "localize-time-I":
            report, fks = localize_time_em_case1(
                problem.regions["B"], problem.windows["target"],
                problem.windows["suppress"], problem.gamma, problem.coeff,
                problem.grid, problem.timegrid, beta=loc["beta"],
                k_schedule=loc["k_schedule"], cg_tol=loc["cg_tol"],
                cg_maxit=loc["cg_maxit"],
            )
        else:
            if loc["delta"] is not None:
                recipe.tau = loc["delta"]
            report, fks = localize_time_em_case2(
                problem.which_field, problem.regions["B"],
                problem.windows["target"], problem.windows["suppress"],
                problem.gamma, problem.coeff, problem.grid, problem.timegrid,
                cfg=cfg, recipe=recipe,
            )
    else:
        if mode == "localize-space":
            win = SpaceTimeWindow(problem.regions["B"], problem.windows["target"])
            report, fks = localize_space(
                win, problem.regions["D"], problem.gamma, problem.coeff,
                problem.grid, problem.timegrid, cfg=cfg,
                beta=loc["beta"], tau=loc["tau"],
            )
        elif mode == "localize-time-I":
            report, fks = localize_time_case1(
                problem.regions["B"], problem.windows["target"],
                problem.windows["suppress"], problem.gamma, problem.coeff,
                problem.grid, problem.timegrid, beta=loc["beta"],
                k_schedule=loc["k_schedule"], cg_tol=loc["cg_tol"],
                cg_maxit=loc["cg_maxit"],
            )
        else:
            report, fks = localize_time_case2(
                problem.regions["B"], problem.windows["target"],
                problem.windows["suppress"], problem.gamma, problem.coeff,
                problem.grid, problem.timegrid, cfg=cfg,
                beta=loc["beta"], delta=loc["delta"],
            )
    write_norms_csv(outdir / "norms.csv", report.ks, report.target_norms,
                    report.suppression_norms, report.ratios)
    files = _save_fks(problem, outdir, report, fks)
    snaps = _localize_snapshot(problem, outdir, fks)
    payload = report.to_dict()
    payload["artifacts"] = {"norms_csv": "norms.csv", "boundary_data": files,
                            "snapshots": snaps}
    return payload


def _localize_snapshot(problem: Problem, outdir: Path, fks) -> list[str]:
    """Field of the last f_k at the target-window midpoint."""
    if not fks or not problem.output.get("save_snapshot", True):
        return []
    tg = problem.timegrid
    a, b = problem.windows["target"]
    t_mid = tg.snap(0.5 * (a + b))
    idx = tg.index(t_mid)
    tag = f"{t_mid:g}"
    files = []
    if problem.is_maxwell:
        from .maxwell import em_boundary_space, forward_maxwell

        space = em_boundary_space(problem.grid, tg, problem.gamma)
        movie = forward_maxwell(space.with_zero_start(fks[-1]), problem.coeff,
                                problem.grid, tg, problem.gamma)
        for c, axis in enumerate("xyz"):
            fname = f"snapshot_t{tag}_E{axis}.wfoc"
            write_field(outdir / fname, movie.E[c][idx], time_index=idx)
            files.append(fname)
    else:
        f = fks[-1].reshape(tg.nt + 1, problem.gamma.num_nodes)
        movie = forward_wave(f, problem.coeff, problem.grid, tg, problem.gamma)
        fname = f"snapshot_t{tag}.wfoc"
        write_field(outdir / fname, movie.values[idx], time_index=idx)
        files.append(fname)
        if problem.grid.dim == 2:
            cname = f"snapshot_t{tag}.csv"
            write_csv_slice(outdir / cname, movie.values[idx],
                            problem.grid.origin, problem.grid.h)
            files.append(cname)
    return files


def _excitation_series(problem: Problem, n_dofs: int) -> np.ndarray:
    tg = problem.timegrid
    exc = problem.excitation
    series = np.zeros((tg.nt + 1, n_dofs))
    if exc.get("type", "zero") == "gaussian-pulse":
        t = np.arange(tg.nt + 1) * tg.dt
        t0 = float(exc.get("t0", 0.15 * tg.T))
        width = float(exc.get("width", 0.05 * tg.T))
        amp = float(exc.get("amplitude", 1.0))
        env = amp * np.exp(-((t - t0) ** 2) / (2 * width**2))
        env[0] = 0.0
        series[:] = env[:, None]
    return series


def _snapshot_files(problem: Problem, outdir: Path, movie) -> list[str]:
    tg = problem.timegrid
    times = problem.snapshots or [tg.T]
    files = []
    for t in times:
        idx = tg.index(t)
        tag = f"{tg.snap(t):g}"
        if problem.is_maxwell:
            for name, comps in (("E", movie.E), ("H", movie.H)):
                for c, axis in enumerate("xyz"):
                    j = min(idx, comps[c].shape[0] - 1)
                    fname = f"snapshot_t{tag}_{name}{axis}.wfoc"
                    write_field(outdir / fname, comps[c][j], time_index=idx)
                    files.append(fname)
        else:
            fname = f"snapshot_t{tag}.wfoc"
            write_field(outdir / fname, movie.values[idx], time_index=idx)
            files.append(fname)
            if problem.grid.dim == 2:
                cname = f"snapshot_t{tag}.csv"
                write_csv_slice(outdir / cname, movie.values[idx],
                                problem.grid.origin, problem.grid.h)
                files.append(cname)
    return files


def _run_simulate(problem: Problem, outdir: Path) -> dict:
    if problem.is_maxwell:
        from .maxwell import em_boundary_space, forward_maxwell

        space = em_boundary_space(problem.grid, problem.timegrid, problem.gamma)
        f = _excitation_series(problem, space.n_edges)
        movie = forward_maxwell(f, problem.coeff, problem.grid, problem.timegrid,
                                problem.gamma)
        norms = {"e_l2": movie.e_norm(), "h_l2": movie.h_norm()}
    else:
        f = _excitation_series(problem, problem.gamma.num_nodes)
        movie = forward_wave(f, problem.coeff, problem.grid, problem.timegrid,
                             problem.gamma)
        norms = {"u_l2": movie.norm()}
    files = _snapshot_files(problem, outdir, movie)
    return {"norms": norms, "artifacts": {"snapshots": files},
            "excitation": problem.excitation}


def _run_verify_adjoint(problem: Problem, outdir: Path) -> dict:
    trials = int(problem.verify.get("trials", 20))
    tg = problem.timegrid
    loc = problem.localizer
    target = problem.windows.get("target", (0.3 * tg.T, 0.8 * tg.T))
    B = problem.regions["B"]
    win = SpaceTimeWindow(B, target)
    tau_t = loc["tau"] or 0.25 * tg.T
    tau_p = 0.5 * tg.T
    defects = {}
    if problem.is_maxwell:
        from .maxwell import make_em_P_op, make_em_ops, make_T_sigma_tau, make_T_sigma_tau_h

        for which in ("L", "E", "H"):
            op = make_em_ops(win, which, problem.gamma, problem.coeff,
                             problem.grid, tg)
            defects[which] = dot_test(op, trials=trials, rng_seed=problem.seed)
        sigma = 0.5 * tg.T
        defects["T_sigma_tau"] = dot_test(
            make_T_sigma_tau(sigma, tau_t, B, problem.coeff, problem.grid, tg),
            trials=trials, rng_seed=problem.seed,
        )
        defects["T_sigma_tau_h"] = dot_test(
            make_T_sigma_tau_h(sigma, tau_t, B, problem.coeff, problem.grid, tg),
            trials=trials, rng_seed=problem.seed,
        )
        defects["P_tau"] = dot_test(
            make_em_P_op(tau_p, problem.gamma, problem.coeff, problem.grid, tg),
            trials=trials, rng_seed=problem.seed,
        )
    else:
        defects["L"] = dot_test(
            make_L_op(win, problem.gamma, problem.coeff, problem.grid, tg),
            trials=trials, rng_seed=problem.seed,
        )
        defects["T_tau"] = dot_test(
            make_T_op(tau_t, B, problem.coeff, problem.grid, tg),
            trials=trials, rng_seed=problem.seed,
        )
        defects["P_tau"] = dot_test(
            make_P_op(tau_p, problem.gamma, problem.coeff, problem.grid, tg),
            trials=trials, rng_seed=problem.seed,
        )
    return {"dot_tests": defects, "trials": trials,
            "max_defect": max(defects.values())}


def _run_distance_map(problem: Problem, outdir: Path) -> dict:
    speed = problem.speed_nodes()
    ttm = travel_time_map(problem.grid, speed, problem.gamma)
    files = ["distance_map.wfoc"]
    write_field(outdir / "distance_map.wfoc", ttm.d, time_index=-1)
    if problem.grid.dim == 2:
        write_csv_slice(outdir / "distance_map.csv", ttm.d,
                        problem.grid.origin, problem.grid.h)
        files.append("distance_map.csv")
    return {
        "dist_omega_gamma": ttm.dist_omega_gamma,
        "artifacts": {"fields": files},
    }


_RUNNERS = {
    "localize-space": _run_localize,
    "localize-time-I": _run_localize,
    "localize-time-II": _run_localize,
    "simulate": _run_simulate,
    "verify-adjoint": _run_verify_adjoint,
    "distance-map": _run_distance_map,
}


def run(raw: dict, outdir, strict_reproducible: bool = False) -> dict:
    """Execute one experiment; returns the report payload it wrote."""
    problem = build_problem(raw)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = _base_report(problem, strict_reproducible)
    payload.update(_RUNNERS[problem.mode](problem, outdir))
    _write_report(outdir, payload)
    return payload


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wavefocus",
        description="Boundary excitations focusing waves in space-time windows",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run a {mode} experiment")
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="advisory thread cap for numeric kernels")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--strict-reproducible", action="store_true",
                       help="force deterministic reductions (the default kernels "
                            "are already deterministic; recorded in the report)")
    sub.add_parser("print-schema", help="print the config schema")

    args = parser.parse_args(argv)
    if args.command == "print-schema":
        print(schema_text())
        return 0
    try:
        raw = load_config(args.config)
        if raw["mode"] != args.command:
            raise ConfigError(
                [f"mode: config says {raw['mode']!r} but subcommand is {args.command!r}"]
            )
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.threads is not None:
            os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
        run(raw, args.out, strict_reproducible=args.strict_reproducible)
        return 0
    except ConfigError as exc:
        print(json.dumps({"error": "config", "problems": exc.problems}), file=sys.stderr)
        return 2
    except FeasibilityError as exc:
        print(json.dumps({"error": "feasibility", "detail": str(exc),
                          "report": exc.report.to_dict()}), file=sys.stderr)
        return 3
    except WavefocusError as exc:
        print(json.dumps({"error": "numerical", "type": type(exc).__name__,
                          "detail": str(exc)}), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
