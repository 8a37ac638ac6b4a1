"""Acceptance suite: one test per exit criterion, each printing a
pass/fail line (run with ``pytest tests/test_acceptance.py -v -s``).

All tolerances are pinned here; experiment parameters were calibrated
once against the spectra of the discrete operators (see comments) and
are fixed constants.
"""

from __future__ import annotations

import json
import re
import time
import warnings

import numpy as np
import pytest

from wavefocus.cli import main
from wavefocus.geometry import Grid, TimeGrid, boundary_patch, build_region
from wavefocus.linops import (
    LocalizerConfig,
    dot_test,
    from_matrix,
    localizer_sequence,
)
from wavefocus.maxwell import (
    EmCoefficients,
    em_boundary_space,
    em_cfl_max_dt,
    forward_maxwell,
    interior_divergence_defects,
    make_em_P_op,
    make_em_ops,
    make_T_sigma_tau,
    make_T_sigma_tau_h,
    maxwell_energy,
    e_positions,
    region_edge_masks,
)
from wavefocus.maxwell_localize import (
    EmXiRecipe,
    localize_space_em,
    localize_time_em_case1,
)
from wavefocus.wave import (
    CoefficientField,
    SpaceTimeWindow,
    cfl_max_dt,
    forward_wave,
    make_L_op,
    make_P_op,
    make_T_op,
    wave_energy,
)
from wavefocus.wave_localize import (
    localize_space,
    localize_time_case1,
    localize_time_case2,
)

RESULTS: list[tuple[int, str, bool, str]] = []


def _report(num: int, desc: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {num}: {desc}"
    if detail:
        line += f"  ({detail})"
    print(line, flush=True)
    RESULTS.append((num, desc, ok, detail))
    assert ok, line


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def _wave_problem_48(nt=200, bumpy=True, seed=0):
    grid = Grid(n=(48, 48), h=(1 / 48, 1 / 48))
    if bumpy:
        rng = np.random.default_rng(seed)
        pts = grid.node_coords()
        c = np.full(grid.node_shape, 1.2)
        q = np.zeros(grid.node_shape)
        for _ in range(3):
            ctr = rng.uniform(0.2, 0.8, 2)
            c += rng.uniform(-0.5, 0.7) * np.exp(
                -np.sum((pts - ctr) ** 2, -1) / (2 * 0.15**2)
            )
            q += rng.uniform(0.0, 0.5) * np.exp(
                -np.sum((pts - ctr[::-1]) ** 2, -1) / (2 * 0.2**2)
            )
        coeff = CoefficientField(c=np.clip(c, 0.5, 2.0), q=q)
    else:
        coeff = CoefficientField.constant(grid, c=1.0)
    dt = cfl_max_dt(grid, coeff)
    tg = TimeGrid(nt=nt, dt=dt)
    gamma = boundary_patch(grid, ["x-"])
    return grid, coeff, tg, gamma


BUMPY_EPS = {"const": 1.0, "bumps": [{"center": (0.5, 0.4, 0.6), "width": 0.3, "amplitude": 0.5}]}
BUMPY_MU = {"const": 1.2, "bumps": [{"center": (0.3, 0.6, 0.4), "width": 0.25, "amplitude": -0.4}]}


def test_criterion_01_adjoint_exactness():
    t0 = time.time()
    worst = {}
    # wave on 48^2 x 200 steps, variable coefficients
    grid, coeff, tg, gamma = _wave_problem_48()
    B = build_region(grid, {"type": "ball", "center": (0.35, 0.5), "radius": 0.1})
    win = SpaceTimeWindow(B, (0.3 * tg.T, 0.8 * tg.T))
    worst["wave L"] = dot_test(make_L_op(win, gamma, coeff, grid, tg), trials=20, rng_seed=1)
    worst["wave T_tau"] = dot_test(
        make_T_op(0.2 * tg.T, B, coeff, grid, tg), trials=20, rng_seed=2
    )
    worst["wave P_tau"] = dot_test(
        make_P_op(0.5 * tg.T, gamma, coeff, grid, tg), trials=20, rng_seed=3
    )
    # Maxwell on 20^3 x 120 steps, variable coefficients
    grid3 = Grid(n=(20,) * 3, h=(1 / 20,) * 3)
    coeff3 = EmCoefficients.from_expressions(grid3, BUMPY_EPS, BUMPY_MU)
    tg3 = TimeGrid(nt=120, dt=em_cfl_max_dt(grid3, coeff3))
    gamma3 = boundary_patch(grid3, ["x-"])
    B3 = build_region(grid3, {"type": "ball", "center": (0.5, 0.5, 0.5), "radius": 0.2})
    win3 = SpaceTimeWindow(B3, (0.3 * tg3.T, 0.8 * tg3.T))
    for which in ("L", "E", "H"):
        op = make_em_ops(win3, which, gamma3, coeff3, grid3, tg3)
        worst[f"maxwell {which}"] = dot_test(op, trials=20, rng_seed=4)
    worst["maxwell T_sigma_tau"] = dot_test(
        make_T_sigma_tau(0.45 * tg3.T, 0.25 * tg3.T, B3, coeff3, grid3, tg3),
        trials=20, rng_seed=5,
    )
    worst["maxwell T_sigma_tau_h"] = dot_test(
        make_T_sigma_tau_h(0.45 * tg3.T, 0.25 * tg3.T, B3, coeff3, grid3, tg3),
        trials=20, rng_seed=6,
    )
    worst["maxwell P_tau"] = dot_test(
        make_em_P_op(0.5 * tg3.T, gamma3, coeff3, grid3, tg3), trials=20, rng_seed=7
    )
    elapsed = time.time() - t0
    bad = {k: v for k, v in worst.items() if v > 1e-12}
    _report(
        1,
        "adjoint exactness: dot-test defect <= 1e-12 for every exact-mode operator",
        not bad and elapsed <= 180.0,
        f"max defect {max(worst.values()):.2e}, {elapsed:.0f}s",
    )


def test_criterion_02_localizer_oracle():
    t0 = time.time()
    # closed-form two-vector example
    A1 = from_matrix(np.array([[1.0], [0.0]]))
    A2 = from_matrix(np.array([[0.0], [1.0]]))
    out = localizer_sequence(
        A1, A2, np.array([1.0, 0.0]),
        LocalizerConfig(alphas=[1.0, 1e-2, 1e-4], cg_tol=1e-13),
    )
    closed_ok = all(
        np.allclose(xa, [alpha ** -0.25, 0.0], rtol=1e-10)
        for alpha, xa in zip(out.alphas, out.xi_alphas)
    )
    # dense 6x3 instances with rank-oracle-verified non-inclusion;
    # entries scaled so the schedule starts inside the operative spectrum
    rng = np.random.default_rng(7)
    mono_ok = True
    checked = 0
    while checked < 3:
        M1 = rng.standard_normal((6, 3))
        M2 = 2.0 * rng.standard_normal((6, 3))
        if np.linalg.matrix_rank(M2) != 3:
            continue
        if np.linalg.matrix_rank(np.hstack([M2, M1])) <= 3:
            continue
        xi = M1 @ rng.standard_normal(3)
        resid = xi - M2 @ np.linalg.lstsq(M2, xi, rcond=None)[0]
        if np.linalg.norm(resid) < 1e-3 * np.linalg.norm(xi):
            continue
        checked += 1
        res = localizer_sequence(
            from_matrix(M1), from_matrix(M2), xi,
            LocalizerConfig(alphas=[10.0 ** (-j) for j in range(9)], cg_tol=1e-14),
        )
        n1 = np.array(res.norms_a1)
        n2 = np.array(res.norms_a2)
        mono_ok &= bool(np.all(np.diff(n1) > 0) and np.all(np.diff(n2) < 0))
    elapsed = time.time() - t0
    _report(
        2,
        "localizer closed form to 1e-10 and strict dense-oracle monotonicity",
        closed_ok and mono_ok and elapsed <= 1.0,
        f"{elapsed:.2f}s",
    )


def test_criterion_03_conservation():
    t0 = time.time()
    # wave: 1000 steps after the excitation ends, q >= 0
    grid, coeff, tg, gamma = _wave_problem_48(nt=1100)
    t = np.arange(tg.nt + 1) * tg.dt
    env = np.exp(-((t - 10 * tg.dt) ** 2) / (2 * (4 * tg.dt) ** 2))
    cutoff = 60
    env[cutoff:] = 0.0
    f = np.tile(env[:, None], (1, gamma.num_nodes))
    movie = forward_wave(f, coeff, grid, tg, gamma).values
    E = wave_energy(movie, coeff, grid, tg.dt)
    tail = E[cutoff + 1 :]
    wave_drift = (np.max(tail) - np.min(tail)) / np.max(tail)
    # Yee: energy drift and interior divergence over 1000 steps
    grid3 = Grid(n=(12,) * 3, h=(1 / 12,) * 3)
    coeff3 = EmCoefficients.from_expressions(grid3, BUMPY_EPS, BUMPY_MU)
    tg3 = TimeGrid(nt=1060, dt=em_cfl_max_dt(grid3, coeff3))
    gamma3 = boundary_patch(grid3, ["x-"])
    space3 = em_boundary_space(grid3, tg3, gamma3)
    t3 = np.arange(tg3.nt + 1) * tg3.dt
    env3 = np.exp(-((t3 - 10 * tg3.dt) ** 2) / (2 * (4 * tg3.dt) ** 2))
    cutoff3 = 50
    env3[cutoff3:] = 0.0
    env3[0] = 0.0
    f3 = np.tile(env3[:, None], (1, space3.n_edges))
    movie3 = forward_maxwell(f3, coeff3, grid3, tg3, gamma3)
    W = maxwell_energy(movie3)
    tail3 = W[cutoff3 + 1 :]
    yee_drift = (np.max(tail3) - np.min(tail3)) / np.max(tail3)
    de, dh = interior_divergence_defects(movie3, margin=2)
    scale = max(max(np.max(np.abs(movie3.E[c])) for c in range(3)), 1e-300) / grid3.h[0]
    div_ok = de <= 1e-12 * scale and dh <= 1e-12 * scale
    elapsed = time.time() - t0
    _report(
        3,
        "energy drift <= 1e-10 per 1000 steps (wave and Yee); interior "
        "divergence <= 1e-12 * field scale",
        wave_drift <= 1e-10 and yee_drift <= 1e-10 and div_ok and elapsed <= 60.0,
        f"wave {wave_drift:.1e}, yee {yee_drift:.1e}, div ({de / scale:.1e}, "
        f"{dh / scale:.1e}), {elapsed:.0f}s",
    )


def test_criterion_04_finite_speed():
    t0 = time.time()
    # wave: single boundary node switched on at a known step
    grid, coeff, tg, gamma = _wave_problem_48(nt=120, bumpy=False)
    f = np.zeros((tg.nt + 1, gamma.num_nodes))
    j0 = 3
    f[j0:, gamma.num_nodes // 2] = 1.0
    movie = forward_wave(f, coeff, grid, tg, gamma).values
    ii, jj = np.meshgrid(np.arange(49), np.arange(49), indexing="ij")
    manhattan = np.abs(ii - 0) + np.abs(jj - 24)
    wave_ok = True
    nonzero_seen = False
    for n in range(tg.nt + 1):
        outside = manhattan > max(n - j0, 0)
        wave_ok &= bool(np.all(np.abs(movie[n][outside]) <= 1e-300))
        nonzero_seen |= bool(np.any(movie[n] != 0.0))
    # Maxwell: one tangential edge dof switched on from step 1
    grid3 = Grid(n=(10,) * 3, h=(0.1,) * 3)
    coeff3 = EmCoefficients.from_expressions(grid3, 1.0, 1.0)
    tg3 = TimeGrid(nt=10, dt=em_cfl_max_dt(grid3, coeff3))
    gamma3 = boundary_patch(grid3, ["x-"])
    space3 = em_boundary_space(grid3, tg3, gamma3)
    f3 = np.zeros((tg3.nt + 1, space3.n_edges))
    f3[1:, 0] = 1.0
    for c in range(3):
        if space3.masks[c].any():
            src = e_positions(grid3, c)[tuple(np.argwhere(space3.masks[c])[0])]
            break
    movie3 = forward_maxwell(f3, coeff3, grid3, tg3, gamma3)
    em_ok = True
    for n in range(tg3.nt + 1):
        reach = max(n - 1, 0) + 1.5  # one cell per step plus stagger offsets
        for c in range(3):
            pts = e_positions(grid3, c)
            dist = np.sum(np.abs(pts - src), axis=-1) / grid3.h[0]
            em_ok &= bool(np.all(np.abs(movie3.E[c][n][dist > reach]) <= 1e-300))
    elapsed = time.time() - t0
    _report(
        4,
        "finite speed: fields outside the discrete stencil cone are bitwise zero",
        wave_ok and em_ok and nonzero_seen and elapsed <= 30.0,
        f"{elapsed:.0f}s",
    )


def test_criterion_05_wave_localization_space():
    t0 = time.time()
    # standard configuration; the suppression ball radius 0.2 puts
    # |L_D|^2 ~ 0.7 so the schedule k = 1..1e4 sits in the operative
    # regime from the first step
    grid = Grid(n=(48, 48), h=(1 / 48, 1 / 48))
    coeff = CoefficientField.constant(grid, c=1.0, q=0.0)
    dt = cfl_max_dt(grid, coeff)
    nt = int(np.ceil(2.0 / dt))
    tg = TimeGrid(nt=nt, dt=2.0 / nt)
    gamma = boundary_patch(grid, ["x-"])
    B = build_region(grid, {"type": "ball", "center": (0.3, 0.5), "radius": 0.08})
    D = build_region(grid, {"type": "ball", "center": (0.7, 0.5), "radius": 0.2})
    win = SpaceTimeWindow(B, (0.9, 1.4))
    cfg = LocalizerConfig(k_schedule=[1, 10, 100, 1000, 10000],
                          cg_tol=1e-7, cg_maxit=800)
    rep, _ = localize_space(win, D, gamma, coeff, grid, tg, cfg=cfg, beta=1e-3)
    t = np.array(rep.target_norms)
    s = np.array(rep.suppression_norms)
    trends = bool(np.all(t[1:] >= t[:-1] * 0.95) and np.all(s[1:] <= s[:-1] * 1.05))
    growth = rep.ratios[-1] / rep.ratios[0]
    elapsed = time.time() - t0
    _report(
        5,
        "wave space localization: monotone trends (5% slack), final ratio "
        ">= 10x initial",
        trends and growth >= 10.0 and elapsed <= 300.0,
        f"ratio growth {growth:.1f}x, {elapsed:.0f}s",
    )


def test_criterion_06_time_case_I():
    t0 = time.time()
    # wave
    grid = Grid(n=(48, 48), h=(1 / 48, 1 / 48))
    coeff = CoefficientField.constant(grid, c=1.0)
    dt = cfl_max_dt(grid, coeff)
    nt = int(np.ceil(2.0 / dt))
    tg = TimeGrid(nt=nt, dt=2.0 / nt)
    gamma = boundary_patch(grid, ["x-"])
    B = build_region(grid, {"type": "ball", "center": (0.3, 0.5), "radius": 0.08})
    rep_w, _ = localize_time_case1(
        B, (1.3, 1.8), (0.0, 0.25), gamma, coeff, grid, tg,
        beta=1e-3, k_schedule=[1, 10, 100], cg_tol=1e-8, cg_maxit=400,
    )
    tw = np.array(rep_w.target_norms)
    ksw = np.array(rep_w.ks)
    wave_ok = (
        rep_w.suppression_norms == [0.0, 0.0, 0.0]
        and np.max(np.abs(tw / (ksw * tw[0] / ksw[0]) - 1.0)) <= 1e-12
        and tw[0] > 0.0
    )
    # Maxwell
    grid3 = Grid(n=(12,) * 3, h=(1 / 12,) * 3)
    coeff3 = EmCoefficients.from_expressions(grid3, 1.0, 1.0)
    dt3 = em_cfl_max_dt(grid3, coeff3)
    nt3 = int(np.ceil(2.0 / dt3))
    tg3 = TimeGrid(nt=nt3, dt=2.0 / nt3)
    gamma3 = boundary_patch(grid3, ["x-"])
    B3 = build_region(grid3, {"type": "ball", "center": (0.35, 0.5, 0.5), "radius": 0.15})
    rep_m, _ = localize_time_em_case1(
        B3, (1.4, 1.9), (0.0, 0.3), gamma3, coeff3, grid3, tg3,
        beta=1e-2, k_schedule=[1, 10, 100], cg_tol=1e-6, cg_maxit=200,
    )
    tm = np.array(rep_m.target_norms)
    ksm = np.array(rep_m.ks)
    em_ok = (
        rep_m.suppression_norms == [0.0, 0.0, 0.0]
        and np.max(np.abs(tm / (ksm * tm[0] / ksm[0]) - 1.0)) <= 1e-12
        and tm[0] > 0.0
    )
    elapsed = time.time() - t0
    _report(
        6,
        "time case I (wave and Maxwell): suppression bitwise zero, target "
        "exactly linear in k, base datum radiates",
        wave_ok and em_ok and elapsed <= 180.0,
        f"{elapsed:.0f}s",
    )


def test_criterion_07_wave_time_case_II(tmp_path):
    t0 = time.time()
    grid = Grid(n=(48, 48), h=(1 / 48, 1 / 48))
    coeff = CoefficientField.constant(grid, c=1.0)
    dt = cfl_max_dt(grid, coeff)
    nt = int(np.ceil(2.0 / dt))
    tg = TimeGrid(nt=nt, dt=2.0 / nt)
    gamma = boundary_patch(grid, ["x-"])
    B = build_region(grid, {"type": "ball", "center": (0.3, 0.5), "radius": 0.08})
    # the suppression operator spectrum peaks near 3e-2, so the schedule
    # starts at k = 1e2 to sit in the operative regime
    cfg = LocalizerConfig(k_schedule=[1e2, 1e3, 1e4, 1e5, 1e6],
                          cg_tol=1e-7, cg_maxit=900)
    rep, _ = localize_time_case2(
        B, (0.9, 1.2), (1.6, 1.9), gamma, coeff, grid, tg, cfg=cfg, beta=1e-3
    )
    t = np.array(rep.target_norms)
    s = np.array(rep.suppression_norms)
    trends = bool(np.all(t[1:] >= t[:-1] * 0.95) and np.all(s[1:] <= s[:-1] * 1.05))
    growth = rep.ratios[-1] / rep.ratios[0]
    # feasibility gates reject violating configs with exit code 3
    bad_cfg = {
        "schema_version": 1,
        "problem": "wave2d",
        "mode": "localize-time-II",
        "grid": {"n": [16, 16], "extent": [1.0, 1.0]},
        "time": {"T": 2.0},
        "coefficients": {"c": 1.0},
        "gamma": {"faces": ["x-"]},
        "regions": {"B": {"type": "ball", "center": [0.5, 0.5], "radius": 0.3}},
        "windows": {"target": [1.1, 1.3], "suppress": [1.5, 1.8]},
        "seed": 0,
    }
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad_cfg))
    code_inradius = main(["localize-time-II", "--config", str(p),
                          "--out", str(tmp_path / "o1")])
    bad_cfg["regions"]["B"] = {"type": "ball", "center": [0.3, 0.5], "radius": 0.08}
    bad_cfg["windows"] = {"target": [0.3, 0.6], "suppress": [0.9, 1.4]}  # b < dist
    p.write_text(json.dumps(bad_cfg))
    code_dist = main(["localize-time-II", "--config", str(p),
                      "--out", str(tmp_path / "o2")])
    elapsed = time.time() - t0
    _report(
        7,
        "wave time case II: monotone trends, final ratio >= 10x; feasibility "
        "gates exit with code 3",
        trends and growth >= 10.0 and code_inradius == 3 and code_dist == 3
        and elapsed <= 300.0,
        f"ratio growth {growth:.1f}x, exit codes ({code_inradius}, {code_dist}), "
        f"{elapsed:.0f}s",
    )


def test_criterion_08_maxwell_localization_space():
    t0 = time.time()
    grid = Grid(n=(24,) * 3, h=(1 / 24,) * 3)
    coeff = EmCoefficients.from_expressions(grid, 1.0, 1.0)
    dt = em_cfl_max_dt(grid, coeff)
    nt = int(np.ceil(2.0 / dt))
    tg = TimeGrid(nt=nt, dt=2.0 / nt)
    gamma = boundary_patch(grid, ["x-"])
    B = build_region(grid, {"type": "ball", "center": (0.3, 0.5, 0.5), "radius": 0.12})
    D = build_region(grid, {"type": "ball", "center": (0.7, 0.5, 0.5), "radius": 0.22})
    win = SpaceTimeWindow(B, (1.1, 1.6))
    # |L_D|^2 ~ 2e-2, so k = 1e2..1e5 is the operative regime
    cfg = LocalizerConfig(k_schedule=[1e2, 1e3, 1e4, 1e5], cg_tol=1e-5, cg_maxit=250)
    growths = {}
    trends_ok = True
    for which in ("E", "H"):
        rep, _ = localize_space_em(
            which, win, D, gamma, coeff, grid, tg, cfg=cfg,
            recipe=EmXiRecipe(which_field=which, beta=1e-3, cg_tol=1e-6,
                              cg_maxit=200),
        )
        t = np.array(rep.target_norms)
        s = np.array(rep.suppression_norms)
        trends_ok &= bool(np.all(t[1:] >= t[:-1] * 0.95) and np.all(s[1:] <= s[:-1] * 1.05))
        growths[which] = rep.ratios[-1] / rep.ratios[0]
    # seed-projection invariance at the same configuration (single k)
    from wavefocus.geometry import distance_from_region
    from wavefocus.maxwell import node_gradient
    from wavefocus.maxwell_localize import build_em_xi, divfree_seed_e

    dmap = distance_from_region(grid, coeff.speed_at_nodes(grid), B)
    tau = 0.25
    m_nodes = (dmap.d < tau) & ~B.mask & grid.interior_mask()
    base = divfree_seed_e(grid, coeff, m_nodes)
    rng = np.random.default_rng(0)
    phi = np.zeros(grid.node_shape)
    phi[1:-1, 1:-1, 1:-1] = rng.standard_normal(tuple(s - 2 for s in grid.node_shape))
    grad = node_gradient(phi, grid)
    scale = max(np.max(np.abs(base[c])) for c in range(3))
    gmax = max(np.max(np.abs(grad[c])) for c in range(3))
    pert = tuple(base[c] + 0.5 * scale / gmax * grad[c] for c in range(3))
    recipe = EmXiRecipe(which_field="E", tau=tau, beta=1e-3, cg_tol=1e-6, cg_maxit=200)
    xi1, _ = build_em_xi(recipe, win, gamma, coeff, grid, tg, seed_fields=base)
    xi2, _ = build_em_xi(recipe, win, gamma, coeff, grid, tg, seed_fields=pert)
    cfg1 = LocalizerConfig(k_schedule=[1e3], cg_tol=1e-6, cg_maxit=250)
    _, fk1 = localize_space_em("E", win, D, gamma, coeff, grid, tg, cfg=cfg1, xi=xi1)
    _, fk2 = localize_space_em("E", win, D, gamma, coeff, grid, tg, cfg=cfg1, xi=xi2)
    inv_defect = np.linalg.norm(fk1[0] - fk2[0]) / np.linalg.norm(fk1[0])
    elapsed = time.time() - t0
    _report(
        8,
        "Maxwell space localization on 24^3 (E and H targets): monotone "
        "trends, final ratio >= 5x; seed-projection invariance <= 1e-10",
        trends_ok and min(growths.values()) >= 5.0 and inv_defect <= 1e-10
        and elapsed <= 900.0,
        f"growth E {growths['E']:.1f}x, H {growths['H']:.1f}x, invariance "
        f"{inv_defect:.1e}, {elapsed:.0f}s",
    )


def test_criterion_09_adjoint_mode_consistency():
    t0 = time.time()

    def wave_rel_diff(n):
        grid = Grid(n=(n, n), h=(1 / n, 1 / n))
        coeff = CoefficientField.constant(grid, c=1.0)
        dt = cfl_max_dt(grid, coeff)
        nt = int(np.ceil(1.2 / dt))
        tg = TimeGrid(nt=nt, dt=1.2 / nt)
        gamma = boundary_patch(grid, ["x-"])
        B = build_region(grid, {"type": "ball", "center": (0.55, 0.5), "radius": 0.22})
        win = SpaceTimeWindow(B, (0.4, 1.0))
        Lx = make_L_op(win, gamma, coeff, grid, tg, adjoint_mode="exact")
        Lc = make_L_op(win, gamma, coeff, grid, tg, adjoint_mode="continuous")
        ia, ib = win.steps(tg)
        pts = grid.node_coords()
        bump = np.exp(-np.sum((pts - (0.55, 0.5)) ** 2, -1) / (2 * 0.08**2))
        bump[~B.mask] = 0.0
        tt = np.arange(ib - ia) * tg.dt
        tenv = np.exp(-((tt - 0.3) ** 2) / (2 * 0.1**2))
        y = (tenv[:, None] * bump[B.mask][None, :]).ravel()
        a_ex = Lx.adjoint_apply(y)
        a_ct = Lc.adjoint_apply(y)
        return np.sqrt(Lx.inner_in.dot(a_ex - a_ct, a_ex - a_ct)
                       / Lx.inner_in.dot(a_ex, a_ex))

    def em_rel_diff(n):
        grid = Grid(n=(n,) * 3, h=(1 / n,) * 3)
        coeff = EmCoefficients.from_expressions(grid, 1.0, 1.0)
        dt = em_cfl_max_dt(grid, coeff)
        nt = int(np.ceil(1.1 / dt))
        tg = TimeGrid(nt=nt, dt=1.1 / nt)
        gamma = boundary_patch(grid, ["x-"])
        B = build_region(grid, {"type": "ball", "center": (0.5, 0.5, 0.5), "radius": 0.28})
        win = SpaceTimeWindow(B, (0.35, 0.95))
        ia, ib = win.steps(tg)
        Lx = make_em_ops(win, "E", gamma, coeff, grid, tg, adjoint_mode="exact")
        Lc = make_em_ops(win, "E", gamma, coeff, grid, tg, adjoint_mode="continuous")
        emasks = region_edge_masks(grid, B)
        tt = np.arange(ia, ib) * tg.dt
        tenv = np.exp(-((tt - 0.65) ** 2) / (2 * 0.12**2))
        vals = []
        for c in range(3):
            pts = e_positions(grid, c)
            bump = np.exp(-np.sum((pts - 0.5) ** 2, -1) / (2 * 0.12**2))[emasks[c]]
            vals.append(bump if c == 2 else 0.0 * bump)
        base = np.concatenate(vals)
        y = np.concatenate([te * base for te in tenv])
        a_ex = Lx.adjoint_apply(y)
        a_ct = Lc.adjoint_apply(y)
        return np.sqrt(Lx.inner_in.dot(a_ex - a_ct, a_ex - a_ct)
                       / Lx.inner_in.dot(a_ex, a_ex))

    w_coarse, w_fine = wave_rel_diff(48), wave_rel_diff(96)
    wave_order = np.log2(w_coarse / w_fine)
    m_coarse, m_fine = em_rel_diff(8), em_rel_diff(16)
    em_order = np.log2(m_coarse / m_fine)
    elapsed = time.time() - t0
    _report(
        9,
        "exact vs continuous adjoints converge under one refinement with "
        "observed order >= 1",
        wave_order >= 1.0 and em_order >= 1.0 and elapsed <= 300.0,
        f"wave order {wave_order:.2f}, Maxwell order {em_order:.2f}, {elapsed:.0f}s",
    )


def test_criterion_10_reproducibility(tmp_path):
    t0 = time.time()
    cfg = {
        "schema_version": 1,
        "problem": "wave2d",
        "mode": "localize-space",
        "grid": {"n": [16, 16], "extent": [1.0, 1.0]},
        "time": {"T": 2.0},
        "coefficients": {"c": 1.0, "q": 0.0},
        "gamma": {"faces": ["x-"]},
        "regions": {
            "B": {"type": "ball", "center": [0.3, 0.5], "radius": 0.12},
            "D": {"type": "ball", "center": [0.7, 0.5], "radius": 0.2},
        },
        "windows": {"target": [1.1, 1.6]},
        "localizer": {"k_schedule": [1.0, 10.0], "beta": 1e-2,
                      "cg_tol": 1e-5, "cg_maxit": 150},
        "seed": 7,
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    blobs = []
    for name in ("r1", "r2"):
        code = main(["localize-space", "--config", str(p), "--out",
                     str(tmp_path / name), "--strict-reproducible", "--seed", "7"])
        assert code == 0
        raw = (tmp_path / name / "report.json").read_text()
        raw = re.sub(r'^\s*"timestamp": "[^"]*",?\n', "", raw, flags=re.M)
        blobs.append(raw.encode())
    elapsed = time.time() - t0
    _report(
        10,
        "identical config + seed + --strict-reproducible give byte-identical "
        "reports (timestamp excluded)",
        blobs[0] == blobs[1],
        f"{len(blobs[0])} bytes compared, {elapsed:.0f}s",
    )


def test_zz_summary():
    print("\n==== acceptance summary ====", flush=True)
    for num, desc, ok, detail in sorted(RESULTS):
        status = "PASS" if ok else "FAIL"
        print(f"  [{status}] criterion {num}: {desc} {('(' + detail + ')') if detail else ''}",
              flush=True)
    assert all(ok for _, _, ok, _ in RESULTS)
    assert len(RESULTS) >= 10
