"""Scalar wave-equation FDTD solver and its restricted solution operators.

Explicit leapfrog for  c^{-2} u_tt - lap u + q u = g  on the node grid:

    u^{n+1} = 2 u^n - u^{n-1} + dt^2 c^2 (lap_h u^n - q u^n + g^n)

with Dirichlet injection of boundary data on a patch Gamma (zero on the
rest of the boundary) and homogeneous initial data.  The PRIMARY adjoints
of all derived operators are exact algebraic transposes of this discrete
pipeline (reverse-time recurrence with transposed stencil / injection),
combined with the diagonal quadrature weights of the declared L2
surrogate inner products.  The continuous adjoint characterization
(backward solve plus normal-derivative trace) is provided as a
cross-check mode with mesh-dependent agreement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CflError, InvalidCoefficientError, InvalidInputError
from .geometry import BoundaryPatch, Grid, Region, TimeGrid, distance_from_region
from .linops import LinearMap, WeightedInner

CFL_SAFETY = 0.95


@dataclass(frozen=True)
class CoefficientField:
    """Wave speed c(x) and potential q(x) sampled on the grid nodes."""

    c: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if self.c.shape != self.q.shape:
            raise InvalidCoefficientError("c and q must share the node shape")
        if not np.all(np.isfinite(self.c)) or not np.all(np.isfinite(self.q)):
            raise InvalidCoefficientError("coefficients must be finite")
        if np.min(self.c) <= 0.0:
            raise InvalidCoefficientError(
                f"wave speed must be bounded away from zero, min c = {np.min(self.c):g}"
            )

    @classmethod
    def constant(cls, grid: Grid, c: float = 1.0, q: float = 0.0) -> "CoefficientField":
        return cls(
            c=np.full(grid.node_shape, float(c)),
            q=np.full(grid.node_shape, float(q)),
        )

    @property
    def c_max(self) -> float:
        return float(np.max(self.c))


def cfl_max_dt(grid: Grid, coeff: CoefficientField) -> float:
    """Largest stable dt: dt * max(c) * sqrt(sum 1/h_a^2) <= CFL_SAFETY."""
    s = np.sqrt(sum(1.0 / h**2 for h in grid.h))
    return CFL_SAFETY / (coeff.c_max * s)


@dataclass(frozen=True)
class SpaceTimeWindow:
    """Region x time interval; interval endpoints snap to step indices."""

    region: Region
    interval: tuple[float, float]

    def steps(self, tg: TimeGrid) -> tuple[int, int]:
        a, b = self.interval
        if a > b:
            raise InvalidInputError(f"window interval ({a}, {b}) is reversed")
        return tg.index(a), tg.index(b)

    def snapped(self, tg: TimeGrid) -> tuple[float, float]:
        ia, ib = self.steps(tg)
        return ia * tg.dt, ib * tg.dt


@dataclass
class BoundaryTimeSeries:
    """Boundary excitation f on Gamma x time grid, shape (nt+1, n_gamma)."""

    values: np.ndarray
    patch: BoundaryPatch
    timegrid: TimeGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.timegrid.nt + 1, self.patch.num_nodes)
        if self.values.shape != expected:
            raise InvalidInputError(
                f"boundary series shape {self.values.shape} != {expected}"
            )

    def norm(self, grid: Grid | None = None) -> float:
        w = self.patch.node_area_weights() * self.timegrid.dt
        return float(np.sqrt(np.sum(w[None, :] * self.values**2)))


@dataclass
class FieldMovie:
    """Full space-time record u, shape (nt+1, *node_shape)."""

    values: np.ndarray
    grid: Grid
    timegrid: TimeGrid

    def norm(self, window: SpaceTimeWindow | None = None) -> float:
        vol = self.grid.cell_volume
        dt = self.timegrid.dt
        if window is None:
            return float(np.sqrt(vol * dt * np.sum(self.values**2)))
        ia, ib = window.steps(self.timegrid)
        sub = self.values[ia:ib][:, window.region.mask]
        return float(np.sqrt(vol * dt * np.sum(sub**2)))

    def snapshot(self, t: float) -> np.ndarray:
        return self.values[self.timegrid.index(t)]


# ---------------------------------------------------------------------------
# Stencils
# ---------------------------------------------------------------------------


def _laplacian_interior(u: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """5/7-point Laplacian evaluated at interior nodes."""
    if u.ndim == 2:
        hx2, hy2 = h[0] ** 2, h[1] ** 2
        core = u[1:-1, 1:-1]
        return (
            (u[2:, 1:-1] + u[:-2, 1:-1] - 2.0 * core) / hx2
            + (u[1:-1, 2:] + u[1:-1, :-2] - 2.0 * core) / hy2
        )
    hx2, hy2, hz2 = h[0] ** 2, h[1] ** 2, h[2] ** 2
    core = u[1:-1, 1:-1, 1:-1]
    return (
        (u[2:, 1:-1, 1:-1] + u[:-2, 1:-1, 1:-1] - 2.0 * core) / hx2
        + (u[1:-1, 2:, 1:-1] + u[1:-1, :-2, 1:-1] - 2.0 * core) / hy2
        + (u[1:-1, 1:-1, 2:] + u[1:-1, 1:-1, :-2] - 2.0 * core) / hz2
    )


def _stencil_all(w: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """Transpose of interior-Laplacian evaluation: the same symmetric
    stencil applied at every node to an array that vanishes on the
    boundary, with out-of-domain neighbors read as zero."""
    diag = -2.0 * sum(1.0 / ha**2 for ha in h)
    out = diag * w
    for axis, ha in enumerate(h):
        inv = 1.0 / ha**2
        src_lo = [slice(None)] * w.ndim
        dst_lo = [slice(None)] * w.ndim
        src_lo[axis] = slice(1, None)
        dst_lo[axis] = slice(0, -1)
        out[tuple(dst_lo)] += inv * w[tuple(src_lo)]
        src_hi = [slice(None)] * w.ndim
        dst_hi = [slice(None)] * w.ndim
        src_hi[axis] = slice(0, -1)
        dst_hi[axis] = slice(1, None)
        out[tuple(dst_hi)] += inv * w[tuple(src_hi)]
    return out


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class WaveSim:
    """Leapfrog engine: forward pipeline and its exact algebraic transpose."""

    def __init__(
        self,
        grid: Grid,
        timegrid: TimeGrid,
        coeff: CoefficientField,
        gamma: BoundaryPatch | None = None,
    ):
        if coeff.c.shape != grid.node_shape:
            raise InvalidCoefficientError("coefficient arrays must be node-shaped")
        dt_max = cfl_max_dt(grid, coeff)
        if timegrid.dt > dt_max * (1.0 + 1e-12):
            raise CflError(timegrid.dt, dt_max)
        self.grid = grid
        self.tg = timegrid
        self.coeff = coeff
        self.gamma = gamma
        self.int_sl = (slice(1, -1),) * grid.dim
        self.c2_int = (coeff.c**2)[self.int_sl]
        self.q_int = coeff.q[self.int_sl]
        self.dt2 = timegrid.dt**2
        self.gmask = gamma.node_mask if gamma is not None else None

    def forward(
        self,
        f: np.ndarray | None = None,
        g: np.ndarray | None = None,
        nt_stop: int | None = None,
    ) -> np.ndarray:
        """Run the scheme; returns the movie of shape (N+1, *node_shape).

        ``f``: (N+1, n_gamma) Dirichlet data on the patch (zero elsewhere
        on the boundary).  ``g``: (N+1, *node_shape) interior source; only
        slots 1..N-1 influence the solution.
        """
        N = self.tg.nt if nt_stop is None else int(nt_stop)
        shape = (N + 1,) + self.grid.node_shape
        movie = np.zeros(shape)
        if f is not None:
            movie[0][self.gmask] = f[0]
            if N >= 1:
                movie[1][self.gmask] = f[1]
        h = self.grid.h
        dt2 = self.dt2
        isl = self.int_sl
        for n in range(1, N):
            un = movie[n]
            rhs = _laplacian_interior(un, h) - self.q_int * un[isl]
            if g is not None:
                rhs += g[n][isl]
            movie[n + 1][isl] = 2.0 * un[isl] - movie[n - 1][isl] + dt2 * self.c2_int * rhs
            if f is not None:
                movie[n + 1][self.gmask] = f[n + 1]
        return movie

    def backward(self, g: np.ndarray, nt_stop: int | None = None) -> np.ndarray:
        """Reverse-time solve with zero terminal data and homogeneous
        Dirichlet boundary: v^{n-1} = 2 v^n - v^{n+1} + dt^2 c^2 (...)."""
        N = self.tg.nt if nt_stop is None else int(nt_stop)
        movie = np.zeros((N + 1,) + self.grid.node_shape)
        h = self.grid.h
        isl = self.int_sl
        for n in range(N - 1, 0, -1):
            vn = movie[n]
            rhs = _laplacian_interior(vn, h) - self.q_int * vn[isl] + g[n][isl]
            movie[n - 1][isl] = 2.0 * vn[isl] - movie[n + 1][isl] + self.dt2 * self.c2_int * rhs
        return movie

    def transpose(
        self,
        seeds: np.ndarray,
        need_f: bool = False,
        need_g: bool = False,
        nt_stop: int | None = None,
    ) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Exact transpose of ``forward`` as a map (f, g) -> movie.

        ``seeds`` is movie-shaped; returns (f_adj, g_adj) with the same
        layouts as the forward inputs.  Mutates ``seeds``.
        """
        N = self.tg.nt if nt_stop is None else int(nt_stop)
        h = self.grid.h
        isl = self.int_sl
        f_adj = np.zeros((N + 1, int(self.gmask.sum()))) if need_f else None
        g_adj = np.zeros((N + 1,) + self.grid.node_shape) if need_g else None
        tmp = np.zeros(self.grid.node_shape)
        for m in range(N, 1, -1):
            lam = seeds[m]
            if need_f:
                f_adj[m] = lam[self.gmask]
            mu = lam[isl]
            w = self.dt2 * self.c2_int * mu
            if need_g:
                g_adj[m - 1][isl] = w
            tmp[:] = 0.0
            tmp[isl] = w
            seeds[m - 1] += _stencil_all(tmp, h)
            seeds[m - 1][isl] += 2.0 * mu - self.q_int * w
            seeds[m - 2][isl] -= mu
        if need_f:
            if N >= 1:
                f_adj[1] = seeds[1][self.gmask]
            f_adj[0] = seeds[0][self.gmask]
        return f_adj, g_adj


# ---------------------------------------------------------------------------
# Public solves
# ---------------------------------------------------------------------------


def forward_wave(
    f: BoundaryTimeSeries | np.ndarray,
    coeff: CoefficientField,
    grid: Grid,
    timegrid: TimeGrid,
    gamma: BoundaryPatch,
) -> FieldMovie:
    """Solve the boundary-driven IBVP with Dirichlet data f on Gamma."""
    values = f.values if isinstance(f, BoundaryTimeSeries) else np.asarray(f, float)
    sim = WaveSim(grid, timegrid, coeff, gamma)
    return FieldMovie(sim.forward(f=values), grid, timegrid)


def interior_source_wave(
    g: np.ndarray,
    coeff: CoefficientField,
    grid: Grid,
    timegrid: TimeGrid,
    direction: str = "forward",
) -> FieldMovie:
    """Solve with interior source g (movie-shaped) and homogeneous
    Dirichlet boundary; 'forward' uses zero initial data, 'backward'
    runs the same scheme in reversed time with zero terminal data."""
    sim = WaveSim(grid, timegrid, coeff)
    if direction == "forward":
        return FieldMovie(sim.forward(g=g), grid, timegrid)
    if direction == "backward":
        return FieldMovie(sim.backward(g=g), grid, timegrid)
    raise InvalidInputError(f"unknown direction {direction!r}")


def normal_derivative_trace(
    v: FieldMovie | np.ndarray,
    grid: Grid,
    gamma: BoundaryPatch,
) -> np.ndarray:
    """Outward normal derivative on the patch, one-sided second order.

    Exact on fields quadratic along the face normal.  Returns
    (nsteps, n_gamma) in patch flat order.
    """
    movie = v.values if isinstance(v, FieldMovie) else np.asarray(v, float)
    trace_full = np.zeros_like(movie)
    for axis, side in gamma.faces:
        ha = grid.h[axis]

        def take(layer: int):
            idx = [slice(None)] * (grid.dim + 1)
            idx[axis + 1] = (-1 - layer) if side else layer
            return movie[tuple(idx)]

        tr = (3.0 * take(0) - 4.0 * take(1) + take(2)) / (2.0 * ha)
        dst = [slice(None)] * (grid.dim + 1)
        dst[axis + 1] = -1 if side else 0
        trace_full[tuple(dst)] = tr
    return trace_full[:, gamma.node_mask]


# ---------------------------------------------------------------------------
# Time operators
# ---------------------------------------------------------------------------


def time_reverse(series: np.ndarray, about_index: int) -> np.ndarray:
    """r[j] = series[about - j] with zero fill outside the record."""
    out = np.zeros_like(series)
    n = series.shape[0]
    for j in range(n):
        k = about_index - j
        if 0 <= k < n:
            out[j] = series[k]
    return out


def time_translate(series: np.ndarray, by_index: int) -> np.ndarray:
    """r[j] = series[j - by] with zero fill (data shifted later in time)."""
    out = np.zeros_like(series)
    n = series.shape[0]
    if by_index >= n or by_index <= -n:
        return out
    if by_index >= 0:
        out[by_index:] = series[: n - by_index]
    else:
        out[: n + by_index] = series[-by_index:]
    return out


def time_integrate(series: np.ndarray, from_index: int, dt: float) -> np.ndarray:
    """S[j] = integral from t_{from} to t_j, cumulative trapezoid."""
    n = series.shape[0]
    cum = np.zeros_like(series, dtype=float)
    if n > 1:
        incr = 0.5 * dt * (series[1:] + series[:-1])
        np.cumsum(incr, axis=0, out=cum[1:])
    return cum - cum[from_index]


# ---------------------------------------------------------------------------
# Restricted solution operators
# ---------------------------------------------------------------------------


def boundary_weights(gamma: BoundaryPatch, tg: TimeGrid, nsteps: int | None = None) -> np.ndarray:
    """Flat area*dt weights for a boundary series of ``nsteps`` rows."""
    nsteps = tg.nt + 1 if nsteps is None else nsteps
    area = gamma.node_area_weights()
    return np.tile(area * tg.dt, (nsteps, 1)).ravel()


def make_L_op(
    window: SpaceTimeWindow,
    gamma: BoundaryPatch,
    coeff: CoefficientField,
    grid: Grid,
    timegrid: TimeGrid,
    adjoint_mode: str = "exact",
) -> LinearMap:
    """Restricted solution operator f -> u_f on the space-time window.

    Domain: L2(Gamma_T) with area*dt weights; codomain: L2(window) with
    vol*dt weights.  'exact' adjoint is the algebraic transpose of the
    discrete pipeline; 'continuous' solves the backward IBVP with the
    window data as source and takes the normal-derivative trace.
    """
    if adjoint_mode not in ("exact", "continuous"):
        raise InvalidInputError(f"unknown adjoint_mode {adjoint_mode!r}")
    sim = WaveSim(grid, timegrid, coeff, gamma)
    ia, ib = window.steps(timegrid)
    rmask = window.region.mask
    nmask = int(rmask.sum())
    ngam = gamma.num_nodes
    nt = timegrid.nt
    nwin = max(ib - ia, 0)
    vol_dt = grid.cell_volume * timegrid.dt
    area_dt = gamma.node_area_weights() * timegrid.dt

    def apply(fvec: np.ndarray) -> np.ndarray:
        f = fvec.reshape(nt + 1, ngam)
        movie = sim.forward(f=f)
        if nwin == 0:
            return np.zeros(0)
        return movie[ia:ib][:, rmask].ravel()

    def adjoint_exact(yvec: np.ndarray) -> np.ndarray:
        seeds = np.zeros((nt + 1,) + grid.node_shape)
        if nwin > 0:
            seeds[ia:ib][:, rmask] = vol_dt * yvec.reshape(nwin, nmask)
        f_adj, _ = sim.transpose(seeds, need_f=True)
        return (f_adj / area_dt[None, :]).ravel()

    def adjoint_continuous(yvec: np.ndarray) -> np.ndarray:
        ghat = np.zeros((nt + 1,) + grid.node_shape)
        if nwin > 0:
            ghat[ia:ib][:, rmask] = yvec.reshape(nwin, nmask)
        v = sim.backward(g=ghat)
        # Green's identity with v=0 on the whole boundary gives
        # <u_f, g> = -int_Gamma f dnu(v_g); the minus sign is essential
        return -normal_derivative_trace(v, grid, gamma).ravel()

    return LinearMap(
        apply=apply,
        adjoint_apply=adjoint_exact if adjoint_mode == "exact" else adjoint_continuous,
        dim_in=(nt + 1) * ngam,
        dim_out=nwin * nmask,
        inner_in=WeightedInner(boundary_weights(gamma, timegrid)),
        inner_out=WeightedInner(vol_dt),
        name=f"L[{adjoint_mode}]",
    )


def make_T_op(
    tau: float,
    region_b: Region,
    coeff: CoefficientField,
    grid: Grid,
    timegrid: TimeGrid,
    m_mask: np.ndarray | None = None,
) -> LinearMap:
    """Final-time map of radiating interior sources:
    g on B x (0, tau) -> w_g(tau) restricted to M^(tau), the set of
    exterior points within travel-time tau of the region interface.
    """
    i_tau = int(round(tau / timegrid.dt))
    if not (0 < i_tau <= timegrid.nt):
        raise InvalidInputError(f"tau={tau} snaps outside the time grid")
    if m_mask is None:
        dmap = distance_from_region(grid, coeff.c, region_b)
        m_mask = (~region_b.mask) & (dmap.d < tau) & grid.interior_mask()
    if not m_mask.any():
        raise InvalidInputError("M^(tau) is empty; tau too small for the mesh")
    sim = WaveSim(grid, timegrid, coeff)
    bmask = region_b.mask
    nb = int(bmask.sum())
    nm = int(m_mask.sum())
    vol = grid.cell_volume
    vol_dt = vol * timegrid.dt

    def apply(gvec: np.ndarray) -> np.ndarray:
        gmov = np.zeros((i_tau + 1,) + grid.node_shape)
        gmov[0:i_tau][:, bmask] = gvec.reshape(i_tau, nb)
        movie = sim.forward(g=gmov, nt_stop=i_tau)
        return movie[i_tau][m_mask].ravel()

    def adjoint(yvec: np.ndarray) -> np.ndarray:
        seeds = np.zeros((i_tau + 1,) + grid.node_shape)
        seeds[i_tau][m_mask] = vol * yvec
        _, g_adj = sim.transpose(seeds, need_g=True, nt_stop=i_tau)
        return (g_adj[0:i_tau][:, bmask] / vol_dt).ravel()

    op = LinearMap(
        apply=apply,
        adjoint_apply=adjoint,
        dim_in=i_tau * nb,
        dim_out=nm,
        inner_in=WeightedInner(vol_dt),
        inner_out=WeightedInner(vol),
        name="T_tau",
    )
    op.m_mask = m_mask  # exposed for building the indicator target
    op.i_tau = i_tau
    return op


def make_P_op(
    tau: float,
    gamma: BoundaryPatch,
    coeff: CoefficientField,
    grid: Grid,
    timegrid: TimeGrid,
) -> LinearMap:
    """Final-time map of boundary sources: f on Gamma x (0, tau) -> u_f(tau)."""
    i_tau = int(round(tau / timegrid.dt))
    if not (0 < i_tau <= timegrid.nt):
        raise InvalidInputError(f"tau={tau} snaps outside the time grid")
    sim = WaveSim(grid, timegrid, coeff, gamma)
    ngam = gamma.num_nodes
    vol = grid.cell_volume
    area_dt = gamma.node_area_weights() * timegrid.dt
    nnodes = grid.num_nodes

    def apply(fvec: np.ndarray) -> np.ndarray:
        f = fvec.reshape(i_tau + 1, ngam)
        movie = sim.forward(f=f, nt_stop=i_tau)
        return movie[i_tau].ravel()

    def adjoint(yvec: np.ndarray) -> np.ndarray:
        seeds = np.zeros((i_tau + 1,) + grid.node_shape)
        seeds[i_tau] = vol * yvec.reshape(grid.node_shape)
        f_adj, _ = sim.transpose(seeds, need_f=True, nt_stop=i_tau)
        return (f_adj / area_dt[None, :]).ravel()

    op = LinearMap(
        apply=apply,
        adjoint_apply=adjoint,
        dim_in=(i_tau + 1) * ngam,
        dim_out=nnodes,
        inner_in=WeightedInner(boundary_weights(gamma, timegrid, i_tau + 1)),
        inner_out=WeightedInner(vol),
        name="P_tau",
    )
    op.i_tau = i_tau
    return op


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def wave_energy(movie: np.ndarray, coeff: CoefficientField, grid: Grid, dt: float) -> np.ndarray:
    """Discrete leapfrog energy E^{n+1/2}, exactly conserved once the
    boundary data is identically zero and q >= 0:

      E = vol * [ sum c^-2 ((u^{n+1}-u^n)/dt)^2
                  + sum_edges D u^{n+1} . D u^n / h^2
                  + sum q u^{n+1} u^n ]
    """
    movie = np.asarray(movie, dtype=float)
    vol = grid.cell_volume
    axes = tuple(range(1, movie.ndim))
    du = (movie[1:] - movie[:-1]) / dt
    kin = np.sum(du**2 / coeff.c**2, axis=axes)
    pot = np.sum(coeff.q * movie[1:] * movie[:-1], axis=axes)
    grad = np.zeros_like(kin)
    for axis, ha in enumerate(grid.h):
        sl_hi = [slice(None)] * movie.ndim
        sl_lo = [slice(None)] * movie.ndim
        sl_hi[axis + 1] = slice(1, None)
        sl_lo[axis + 1] = slice(0, -1)
        d = movie[tuple(sl_hi)] - movie[tuple(sl_lo)]
        grad += np.sum(d[1:] * d[:-1], axis=axes) / ha**2
    return vol * (kin + grad + pot)
