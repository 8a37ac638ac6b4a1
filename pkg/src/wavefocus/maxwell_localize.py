"""Localization pipelines for the Maxwell system.

Mirrors the scalar-wave pipelines: localization in space grows the chosen
field (E or H) on B x (a,b) while both fields vanish on D x (0,T);
localization in time grows on B x (a,b) while both fields vanish on the
same region over another interval.  The seed datum is built from a
compactly supported divergence-free current (eps^{-1} curl of a smooth
bump, or its mu-complex analogue for the H path), radiated through the
regularized final-time operator and pushed through the adjoint of the
restricted field operator.  Both target variants share one code path
parameterized by the restriction operator and its weighted product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateXiError,
    FeasibilityError,
    InvalidInputError,
    RegionOverlapError,
)
from .geometry import (
    BoundaryPatch,
    Grid,
    Region,
    TimeGrid,
    check_feasibility,
    distance_from_region,
    fast_march,
    travel_time_map,
)
from .linops import LocalizerConfig, localizer_sequence, tikhonov_solve
from .maxwell import (
    EmCoefficients,
    curl_e,
    curl_h_interior,
    e_positions,
    e_shape,
    em_boundary_space,
    forward_maxwell,
    h_positions,
    h_shape,
    make_em_P_op,
    make_em_ops,
    make_T_sigma_tau,
    make_T_sigma_tau_h,
    project_div_free,
    region_edge_masks,
    region_face_masks,
    _E_INT_SLICES,
)
from .wave import SpaceTimeWindow
from .wave_localize import LocalizationReport, _ratios, default_tau


@dataclass
class EmXiRecipe:
    """Parameters of the seed datum construction."""

    which_field: str = "E"  # restriction operator: E or H
    tau: float | None = None
    beta: float = 1e-3
    psi_scale: float = 1.0
    cg_tol: float = 1e-8
    cg_maxit: int | None = None

    def __post_init__(self):
        if self.which_field not in ("E", "H"):
            raise InvalidInputError(f"which_field must be E or H, got {self.which_field!r}")
        if self.beta <= 0:
            raise InvalidInputError("beta must be positive")


def _smooth_bump(r2: np.ndarray) -> np.ndarray:
    """C-infinity bump exp(1 - 1/(1 - r^2)) on r^2 < 1, zero outside."""
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _inscribed_ball(grid: Grid, mask: np.ndarray):
    """Center and Euclidean radius of a ball inside the masked node set.

    On coarse meshes the radius may be below a cell; the bump then leaks
    outside the set, which the constrained projection repairs, and a
    degenerate (vanishing) seed is caught downstream.
    """
    if not mask.any():
        raise InvalidInputError("cannot inscribe a ball in an empty set")
    clearance = fast_march(grid, np.ones(grid.node_shape), ~mask)
    idx = np.unravel_index(np.argmax(clearance), clearance.shape)
    center = np.array([grid.origin[a] + idx[a] * grid.h[a] for a in range(3)])
    return center, 0.8 * float(clearance[idx])


def divfree_seed_e(grid: Grid, coeff: EmCoefficients, mask: np.ndarray,
                   scale: float = 1.0):
    """Edge field eps^{-1} curl(Psi) with Psi a compactly supported smooth
    bump inside the masked node set: divergence-free by the complex
    identity, supported within one cell of the bump."""
    center, radius = _inscribed_ball(grid, mask)
    # half-cell margin for the curl stencil; any leakage outside the set is
    # repaired by the subsequent constrained projection
    radius = max(radius - 0.5 * max(grid.h), 0.9 * max(grid.h))
    psi = []
    for c in range(3):
        pts = h_positions(grid, c)
        r2 = np.sum((pts - center) ** 2, axis=-1) / radius**2
        psi.append(scale * _smooth_bump(r2) if c == 2 else np.zeros(h_shape(grid, c)))
    ch = curl_h_interior(tuple(psi), grid.h)
    out = []
    for c in range(3):
        full = np.zeros(e_shape(grid, c))
        full[_E_INT_SLICES[c]] = ch[c]
        out.append(full / coeff.eps[c])
    if max(np.max(np.abs(a)) for a in out) == 0.0:
        raise InvalidInputError("seed bump produced a vanishing curl")
    return tuple(out)


def divfree_seed_h(grid: Grid, coeff: EmCoefficients, mask: np.ndarray,
                   scale: float = 1.0):
    """Face field mu^{-1} curl(Psi) with Psi an edge-type bump: the
    mu-complex analogue of divfree_seed_e."""
    center, radius = _inscribed_ball(grid, mask)
    radius = max(radius - 0.5 * max(grid.h), 0.9 * max(grid.h))
    psi = []
    for c in range(3):
        pts = e_positions(grid, c)
        r2 = np.sum((pts - center) ** 2, axis=-1) / radius**2
        psi.append(scale * _smooth_bump(r2) if c == 2 else np.zeros(e_shape(grid, c)))
    ce = curl_e(tuple(psi), grid.h)
    out = tuple(ce[c] / coeff.mu[c] for c in range(3))
    if max(np.max(np.abs(a)) for a in out) == 0.0:
        raise InvalidInputError("seed bump produced a vanishing curl")
    return out


def build_em_xi(
    recipe: EmXiRecipe,
    b_window: SpaceTimeWindow,
    gamma: BoundaryPatch,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    seed_fields=None,
) -> tuple[np.ndarray, dict]:
    """Seed boundary datum xi = E*_{B_{a,b}}[j1] (or H*[j2]) with the
    current the Tikhonov-regularized preimage of a divergence-free target
    under the final-time operator on M^(tau)."""
    a, b = b_window.interval
    speed = coeff.speed_at_nodes(grid)
    ttm = travel_time_map(grid, speed, gamma)
    feas = check_feasibility(ttm, "space", (a, b), timegrid.T)
    if not feas.passed:
        raise FeasibilityError(feas)
    dog = ttm.dist_omega_gamma
    tau = recipe.tau if recipe.tau is not None else default_tau(a, b, dog)
    if not (0.0 < tau < min(b - a, b - dog)):
        raise InvalidInputError(
            f"tau={tau:g} outside the admissible range (0, {min(b - a, b - dog):g})"
        )
    sigma = b - tau

    dmap = distance_from_region(grid, speed, b_window.region)
    m_nodes = (dmap.d < tau) & ~b_window.region.mask & grid.interior_mask()
    if not m_nodes.any():
        raise InvalidInputError("M^(tau) is empty at this resolution")

    which = recipe.which_field
    if which == "E":
        T_op = make_T_sigma_tau(sigma, tau, b_window.region, coeff, grid, timegrid)
        if seed_fields is None:
            seed_fields = divfree_seed_e(grid, coeff, m_nodes, recipe.psi_scale)
        seed_fields = project_div_free(
            tuple(seed_fields[c] * T_op.m_edge_masks[c] for c in range(3)),
            coeff, grid, edge_masks=T_op.m_edge_masks,
        )
        target = np.concatenate([seed_fields[c][T_op.m_edge_masks[c]] for c in range(3)])
    else:
        T_op = make_T_sigma_tau_h(sigma, tau, b_window.region, coeff, grid, timegrid)
        if seed_fields is None:
            seed_fields = divfree_seed_h(grid, coeff, m_nodes, recipe.psi_scale)
        from .maxwell import project_div_free_mu

        seed_fields = project_div_free_mu(
            tuple(seed_fields[c] * T_op.m_face_masks[c] for c in range(3)),
            coeff, grid, face_masks=T_op.m_face_masks,
        )
        target = np.concatenate([seed_fields[c][T_op.m_face_masks[c]] for c in range(3)])
    if np.linalg.norm(target) == 0.0:
        raise InvalidInputError("seed field vanishes on M^(tau)")

    tik = tikhonov_solve(T_op, recipe.beta, target, tol=recipe.cg_tol,
                         maxit=recipe.cg_maxit)
    i_sig, i_top = T_op.steps

    field_op = make_em_ops(b_window, which, gamma, coeff, grid, timegrid)
    ia, ib = b_window.steps(timegrid)
    # embed the current, supported on steps [i_sig, i_top) in B, into the
    # codomain layout of the restriction operator
    region_masks = region_edge_masks(grid, b_window.region) if which == "E" \
        else region_face_masks(grid, b_window.region)
    per_step = int(sum(m.sum() for m in region_masks))
    nsteps_out = ib - ia if which == "E" else min(ib, timegrid.nt) - ia
    ywin = np.zeros((nsteps_out, per_step))
    j2d = tik.x.reshape(i_top - i_sig, per_step)
    for s in range(i_top - i_sig):
        row = i_sig + s - ia
        if 0 <= row < nsteps_out:
            ywin[row] = j2d[s]
    xi = field_op.adjoint_apply(ywin.ravel())
    xi_norm = field_op.inner_in.norm(xi)
    if xi_norm <= 1e-14 * max(float(np.linalg.norm(target)), 1e-300):
        raise DegenerateXiError(f"|xi| = {xi_norm:.3e} is negligible")
    info = {
        "which_field": which,
        "tau": float(tau),
        "sigma": float(sigma),
        "beta": recipe.beta,
        "xi_norm": xi_norm,
        "tikhonov_residual": tik.residual_norm,
        "tikhonov_converged": tik.converged,
        "m_tau_size": int(T_op.dim_out),
        "dist_omega_gamma": dog,
        "feasibility": feas.to_dict(),
    }
    return xi, info


def _fresh_em_norms(fks, gamma, coeff, grid, timegrid, which, b_window, s_region,
                    s_interval):
    """Fresh forward solves; returns per-k target norm (chosen field over
    the target window), combined suppression norm, and all four norms."""
    space = em_boundary_space(grid, timegrid, gamma)
    targets, supps, extras = [], [], []
    for f in fks:
        series = space.with_zero_start(f)
        movie = forward_maxwell(series, coeff, grid, timegrid, gamma)
        te = movie.e_norm(b_window.region, b_window.interval)
        th = movie.h_norm(b_window.region, b_window.interval)
        se = movie.e_norm(s_region, s_interval)
        sh = movie.h_norm(s_region, s_interval)
        targets.append(te if which == "E" else th)
        supps.append(float(np.sqrt(se**2 + sh**2)))
        extras.append({"target_e": te, "target_h": th,
                       "suppress_e": se, "suppress_h": sh})
    return targets, supps, extras


def localize_space_em(
    which: str,
    b_window: SpaceTimeWindow,
    d_region: Region,
    gamma: BoundaryPatch,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    cfg: LocalizerConfig | None = None,
    recipe: EmXiRecipe | None = None,
    xi: np.ndarray | None = None,
) -> tuple[LocalizationReport, list[np.ndarray]]:
    """Space localization of the chosen field against both fields on D."""
    cfg = cfg or LocalizerConfig()
    recipe = recipe or EmXiRecipe(which_field=which)
    if recipe.which_field != which:
        raise InvalidInputError("recipe field and target field disagree")
    if b_window.region.overlaps(d_region):
        raise RegionOverlapError("target and suppression regions overlap")
    if np.any(d_region.mask & grid.boundary_mask()):
        raise InvalidInputError("suppression region must be compactly inside the domain")

    if xi is None:
        xi, info = build_em_xi(recipe, b_window, gamma, coeff, grid, timegrid)
    else:
        info = {"which_field": which, "xi_norm": None, "provided": True}
    field_op = make_em_ops(b_window, which, gamma, coeff, grid, timegrid)
    d_window = SpaceTimeWindow(d_region, (0.0, timegrid.T))
    L_D = make_em_ops(d_window, "L", gamma, coeff, grid, timegrid)
    seq = localizer_sequence(field_op.H, L_D.H, xi, cfg)
    fks = seq.xi_alphas
    targets, supps, extras = _fresh_em_norms(
        fks, gamma, coeff, grid, timegrid, which, b_window, d_region, (0.0, timegrid.T)
    )
    ratios, flags = _ratios(targets, supps)
    report = LocalizationReport(
        mode=f"localize-space-em-{which}",
        ks=list(cfg.k_schedule),
        target_norms=targets,
        suppression_norms=supps,
        ratios=ratios,
        suppressed_to_zero=flags,
        operator_target_norms=seq.norms_a1,
        operator_suppression_norms=seq.norms_a2,
        feasibility=info.get("feasibility", {}),
        params={
            "which_field": which,
            "target_window": list(b_window.snapped(timegrid)),
            "suppression_window": [0.0, timegrid.T],
            "alphas": list(cfg.alphas),
            "cg_tol": cfg.cg_tol,
            "gram_cg_converged": seq.cg_converged,
        },
        xi_provenance=info,
        extra_norms={"per_k": extras},
    )
    return report, fks


def localize_time_em_case1(
    region_b: Region,
    target_window: tuple[float, float],
    suppress_window: tuple[float, float],
    gamma: BoundaryPatch,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    beta: float = 1e-3,
    k_schedule: Sequence[float] | None = None,
    cg_tol: float = 1e-8,
    cg_maxit: int | None = None,
) -> tuple[LocalizationReport, list[np.ndarray]]:
    """Time localization, suppression before the target: f_k = k f with f
    the time-translated Tikhonov preimage of a divergence-free target
    under the final-time boundary map; suppression is exactly zero."""
    a, b = target_window
    c, d = suppress_window
    if not (c < d <= a < b):
        raise InvalidInputError(
            f"case I needs (c,d) before (a,b); got ({c},{d}) and ({a},{b})"
        )
    speed = coeff.speed_at_nodes(grid)
    ttm = travel_time_map(grid, speed, gamma)
    feas = check_feasibility(ttm, "time-I", (a, b), timegrid.T, suppress_window=(c, d))
    if not feas.passed:
        raise FeasibilityError(feas)

    P = make_em_P_op(b - d, gamma, coeff, grid, timegrid)
    phi = divfree_seed_e(grid, coeff, region_b.mask & grid.interior_mask())
    phi = project_div_free(phi, coeff, grid)
    target = np.concatenate([phi[c2].ravel() for c2 in range(3)])
    tik = tikhonov_solve(P, beta, target, tol=cg_tol, maxit=cg_maxit)

    i_d = timegrid.index(d)
    space = em_boundary_space(grid, timegrid, gamma)
    f0_full = P.space.with_zero_start(tik.x)
    f_base = np.zeros((timegrid.nt + 1, space.n_edges))
    hi = min(timegrid.nt + 1, i_d + P.i_tau + 1)
    f_base[i_d:hi] = f0_full[: hi - i_d]

    ks = [float(k) for k in (k_schedule or [10.0**j for j in range(5)])]
    fks = [k * f_base[1:].ravel() for k in ks]
    b_win = SpaceTimeWindow(region_b, (a, b))
    targets, supps, extras = _fresh_em_norms(
        fks, gamma, coeff, grid, timegrid, "E", b_win, region_b, (c, d)
    )
    ratios, flags = _ratios(targets, supps)
    report = LocalizationReport(
        mode="localize-time-em-I",
        ks=ks,
        target_norms=targets,
        suppression_norms=supps,
        ratios=ratios,
        suppressed_to_zero=flags,
        operator_target_norms=[k * targets[0] / ks[0] for k in ks],
        operator_suppression_norms=[0.0 for _ in ks],
        feasibility=feas.to_dict(),
        params={
            "target_window": [timegrid.snap(a), timegrid.snap(b)],
            "suppression_window": [timegrid.snap(c), timegrid.snap(d)],
            "beta": beta,
            "tau": P.i_tau * timegrid.dt,
            "k_schedule": ks,
            "cg_tol": cg_tol,
        },
        xi_provenance={
            "base_datum_norm": float(np.linalg.norm(f_base)),
            "tikhonov_residual": tik.residual_norm,
            "tikhonov_converged": tik.converged,
        },
        extra_norms={"per_k": extras},
    )
    return report, fks


def localize_time_em_case2(
    which: str,
    region_b: Region,
    target_window: tuple[float, float],
    suppress_window: tuple[float, float],
    gamma: BoundaryPatch,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    cfg: LocalizerConfig | None = None,
    recipe: EmXiRecipe | None = None,
) -> tuple[LocalizationReport, list[np.ndarray]]:
    """Time localization, suppression after the target, on one region."""
    cfg = cfg or LocalizerConfig()
    a, b = target_window
    c, d = suppress_window
    if max(a, c) < min(b, d):
        raise InvalidInputError(
            f"target ({a},{b}) and suppression ({c},{d}) intervals overlap"
        )
    if not (a < b < c < d):
        raise InvalidInputError(
            f"case II needs (c,d) after (a,b); got ({c},{d}) and ({a},{b})"
        )
    speed = coeff.speed_at_nodes(grid)
    ttm = travel_time_map(grid, speed, gamma)
    inr = distance_from_region(grid, speed, region_b).max_inside(region_b.mask)
    feas = check_feasibility(
        ttm, "time-II", (a, b), timegrid.T, suppress_window=(c, d), inradius=inr
    )
    if not feas.passed:
        raise FeasibilityError(feas)
    dog = ttm.dist_omega_gamma
    recipe = recipe or EmXiRecipe(which_field=which, tau=0.5 * (b - dog))

    b_window = SpaceTimeWindow(region_b, (a, b))
    xi, info = build_em_xi(recipe, b_window, gamma, coeff, grid, timegrid)
    field_op = make_em_ops(b_window, which, gamma, coeff, grid, timegrid)
    s_window = SpaceTimeWindow(region_b, (c, d))
    L_S = make_em_ops(s_window, "L", gamma, coeff, grid, timegrid)
    seq = localizer_sequence(field_op.H, L_S.H, xi, cfg)
    fks = seq.xi_alphas
    targets, supps, extras = _fresh_em_norms(
        fks, gamma, coeff, grid, timegrid, which, b_window, region_b, (c, d)
    )
    ratios, flags = _ratios(targets, supps)
    report = LocalizationReport(
        mode="localize-time-em-II",
        ks=list(cfg.k_schedule),
        target_norms=targets,
        suppression_norms=supps,
        ratios=ratios,
        suppressed_to_zero=flags,
        operator_target_norms=seq.norms_a1,
        operator_suppression_norms=seq.norms_a2,
        feasibility=feas.to_dict(),
        params={
            "which_field": which,
            "target_window": list(b_window.snapped(timegrid)),
            "suppression_window": list(s_window.snapped(timegrid)),
            "alphas": list(cfg.alphas),
            "inradius": inr,
            "cg_tol": cfg.cg_tol,
            "gram_cg_converged": seq.cg_converged,
        },
        xi_provenance=info,
        extra_norms={"per_k": extras},
    )
    return report, fks
