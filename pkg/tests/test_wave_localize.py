from __future__ import annotations

import warnings

import numpy as np
import pytest

from wavefocus.errors import (
    FeasibilityError,
    InvalidInputError,
    RegionOverlapError,
)
from wavefocus.geometry import Grid, TimeGrid, boundary_patch, build_region
from wavefocus.linops import LocalizerConfig, localizer_sequence, tikhonov_solve
from wavefocus.wave import (
    CoefficientField,
    SpaceTimeWindow,
    cfl_max_dt,
    forward_wave,
    make_L_op,
    make_T_op,
)
from wavefocus.wave_localize import (
    build_xi_space,
    default_tau,
    localize_space,
    localize_time_case1,
    localize_time_case2,
)


def setup(n=32, T=2.0):
    grid = Grid(n=(n, n), h=(1.0 / n, 1.0 / n))
    coeff = CoefficientField.constant(grid, c=1.0)
    dt = cfl_max_dt(grid, coeff)
    nt = int(np.ceil(T / dt))
    tg = TimeGrid(nt=nt, dt=T / nt)
    gamma = boundary_patch(grid, ["x-"])
    return grid, coeff, tg, gamma


def ball(grid, center, radius):
    return build_region(grid, {"type": "ball", "center": center, "radius": radius})


@pytest.fixture(autouse=True)
def _quiet_maxiter():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


class TestBuildXi:
    def test_xi_positive_norm(self):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.1)
        win = SpaceTimeWindow(B, (0.9, 1.4))
        xi, info = build_xi_space(win, gamma, coeff, grid, tg, beta=1e-2,
                                  cg_tol=1e-6, cg_maxit=200)
        assert info["xi_norm"] > 0.0
        assert info["tau"] == pytest.approx(default_tau(0.9, 1.4, info["dist_omega_gamma"]), abs=tg.dt)

    def test_infeasible_window_rejected(self):
        # b below the travel time from Gamma to the far side of the domain
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.1)
        win = SpaceTimeWindow(B, (0.2, 0.8))
        with pytest.raises(FeasibilityError):
            build_xi_space(win, gamma, coeff, grid, tg)

    def test_bad_tau_rejected(self):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.1)
        win = SpaceTimeWindow(B, (0.9, 1.4))
        with pytest.raises(InvalidInputError):
            build_xi_space(win, gamma, coeff, grid, tg, tau=0.45)  # >= b - dist

    def test_beta_sweep_residual_monotone(self):
        # Tikhonov data misfit is non-increasing as beta decreases
        grid, coeff, tg, gamma = setup(n=24, T=1.0)
        B = ball(grid, (0.5, 0.5), 0.15)
        T_op = make_T_op(0.25, B, coeff, grid, tg)
        ones = np.ones(T_op.dim_out)
        prev = np.inf
        for beta in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]:
            g = tikhonov_solve(T_op, beta, ones, tol=1e-10, maxit=3000).x
            mis = T_op.inner_out.norm(T_op.apply(g) - ones)
            assert mis <= prev * (1 + 1e-10), (beta, mis, prev)
            prev = mis


class TestLocalizeSpace:
    def _run(self, cfg=None, beta=1e-3):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.08)
        D = ball(grid, (0.7, 0.5), 0.2)
        win = SpaceTimeWindow(B, (0.9, 1.4))
        cfg = cfg or LocalizerConfig(
            k_schedule=[1, 10, 100, 1000, 10000], cg_tol=1e-7, cg_maxit=500
        )
        return localize_space(win, D, gamma, coeff, grid, tg, cfg=cfg, beta=beta)

    def test_trends_and_ratio(self):
        rep, fks = self._run()
        t = np.array(rep.target_norms)
        s = np.array(rep.suppression_norms)
        assert np.all(t[1:] >= t[:-1] * 0.95), t
        assert np.all(s[1:] <= s[:-1] * 1.05), s
        assert rep.ratios[-1] >= 10 * rep.ratios[0]

    def test_operator_vs_fresh_solve_agreement(self):
        rep, _ = self._run()
        for fresh, op in zip(rep.target_norms, rep.operator_target_norms):
            assert abs(fresh - op) <= 1e-12 * fresh
        for fresh, op in zip(rep.suppression_norms, rep.operator_suppression_norms):
            assert abs(fresh - op) <= 1e-12 * max(fresh, 1e-300)

    def test_deterministic(self):
        rep1, _ = self._run()
        rep2, _ = self._run()
        assert rep1.to_dict() == rep2.to_dict()

    def test_region_overlap_rejected(self):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.45, 0.5), 0.1)
        D = ball(grid, (0.55, 0.5), 0.1)
        with pytest.raises(RegionOverlapError):
            localize_space(SpaceTimeWindow(B, (0.9, 1.4)), D, gamma, coeff, grid, tg)

    def test_d_touching_boundary_rejected(self):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.08)
        D = ball(grid, (0.95, 0.5), 0.1)  # nodes on the right edge
        with pytest.raises(InvalidInputError):
            localize_space(SpaceTimeWindow(B, (0.9, 1.4)), D, gamma, coeff, grid, tg)

    def test_fk_homogeneity_in_xi(self):
        # f_k(2 xi) = 2^{-1/2} f_k(xi), exact algebraic identity
        grid, coeff, tg, gamma = setup(n=24)
        B = ball(grid, (0.3, 0.5), 0.1)
        D = ball(grid, (0.7, 0.5), 0.15)
        win = SpaceTimeWindow(B, (0.9, 1.4))
        xi, _ = build_xi_space(win, gamma, coeff, grid, tg, beta=1e-2,
                               cg_tol=1e-8, cg_maxit=300)
        L_B = make_L_op(win, gamma, coeff, grid, tg)
        L_D = make_L_op(SpaceTimeWindow(D, (0.0, tg.T)), gamma, coeff, grid, tg)
        cfg = LocalizerConfig(k_schedule=[10.0], cg_tol=1e-10, cg_maxit=400)
        f1 = localizer_sequence(L_B.H, L_D.H, xi, cfg).xi_alphas[0]
        f2 = localizer_sequence(L_B.H, L_D.H, 2.0 * xi, cfg).xi_alphas[0]
        assert np.allclose(f2, f1 / np.sqrt(2.0), rtol=1e-8)


class TestLocalizeTimeCaseI:
    def _run(self, target=(1.3, 1.8), suppress=(0.0, 0.25), ks=(1, 10, 100)):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.08)
        return localize_time_case1(
            B, target, suppress, gamma, coeff, grid, tg,
            beta=1e-3, k_schedule=list(ks), cg_tol=1e-8, cg_maxit=300,
        )

    def test_suppression_bitwise_zero(self):
        rep, _ = self._run()
        assert rep.suppression_norms == [0.0, 0.0, 0.0]
        assert all(rep.suppressed_to_zero)
        assert all(r is None for r in rep.ratios)

    def test_target_linear_in_k(self):
        rep, _ = self._run()
        t = np.array(rep.target_norms)
        ks = np.array(rep.ks)
        scaled = t / (ks * t[0] / ks[0])
        assert np.max(np.abs(scaled - 1.0)) <= 1e-12

    def test_base_datum_radiates(self):
        rep, _ = self._run()
        assert rep.target_norms[0] > 0.0

    def test_windows_must_be_ordered(self):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.08)
        with pytest.raises(InvalidInputError):
            localize_time_case1(B, (0.9, 1.4), (1.5, 1.8), gamma, coeff, grid, tg)

    def test_infeasible_rejected(self):
        # dist(Omega, Gamma) = 1.0 is not < b - d = 0.8
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.08)
        with pytest.raises(FeasibilityError):
            localize_time_case1(B, (1.3, 1.6), (0.0, 0.8), gamma, coeff, grid, tg)


class TestLocalizeTimeCaseII:
    def test_trends_and_ratio(self):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.08)
        cfg = LocalizerConfig(k_schedule=[1e2, 1e3, 1e4, 1e5], cg_tol=1e-7, cg_maxit=600)
        rep, fks = localize_time_case2(
            B, (0.9, 1.2), (1.6, 1.9), gamma, coeff, grid, tg, cfg=cfg, beta=1e-3
        )
        t = np.array(rep.target_norms)
        s = np.array(rep.suppression_norms)
        assert np.all(t[1:] >= t[:-1] * 0.95), t
        assert np.all(s[1:] <= s[:-1] * 1.05), s
        assert rep.ratios[-1] >= 10 * rep.ratios[0]

    def test_overlapping_intervals_rejected(self):
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.3, 0.5), 0.08)
        with pytest.raises(InvalidInputError):
            localize_time_case2(B, (0.9, 1.4), (1.2, 1.8), gamma, coeff, grid, tg)

    def test_inradius_violation_rejected(self):
        # inradius(B) = 0.3 is not < (c - b)/2 = 0.2
        grid, coeff, tg, gamma = setup()
        B = ball(grid, (0.5, 0.5), 0.3)
        with pytest.raises(FeasibilityError):
            localize_time_case2(B, (0.9, 1.2), (1.6, 1.9), gamma, coeff, grid, tg)


class TestReport:
    def test_report_roundtrip_dict(self):
        grid, coeff, tg, gamma = setup(n=24)
        B = ball(grid, (0.3, 0.5), 0.1)
        rep, _ = localize_time_case1(
            B, (1.3, 1.8), (0.0, 0.25), gamma, coeff, grid, tg,
            beta=1e-2, k_schedule=[1, 10], cg_tol=1e-6, cg_maxit=150,
        )
        d = rep.to_dict()
        assert d["mode"] == "localize-time-I"
        assert d["feasibility"]["passed"] is True
        assert len(d["target_norms"]) == 2
        # snapped windows echoed
        assert d["params"]["target_window"][0] == pytest.approx(tg.snap(1.3))
