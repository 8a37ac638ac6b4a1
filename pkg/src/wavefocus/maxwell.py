"""3D Yee-grid Maxwell solver and its restricted solution operators.

Staggered leapfrog for  eps dE/dt = curl H + j_e,  mu dH/dt = -curl E + j_m
with tangential-E injection on a boundary patch Gamma and PEC (nu x E = 0)
on the rest of the boundary.  E components live on edges at integer time
steps, H components on faces at half steps.

Boundary data are the tangential electric components on the Gamma faces
(an in-plane rotation of the conventional nu x E datum, which carries the
same information), with the discrete H1-in-time inner product

    <f, g> = sum_n sum_edges area * (f_n - f_{n-1}) . (g_n - g_{n-1}) / dt

and f(0) = 0.  Its Gram matrix factors through the time-difference map, so
the Riesz inversion needed by exact adjoints reduces to cumulative sums.

The exact adjoints of all operators are algebraic transposes of the
discrete pipeline; the continuous adjoint characterization (backward
system driven by time-integrated sources, tangential-H trace, one time
integration) is available as a cross-check mode.

Backward (adjoint-system) solves are realized by conjugating the forward
scheme with time reversal and an H sign flip, which is an exact discrete
symmetry of the staggered update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CflError, InvalidCoefficientError, InvalidInputError
from .geometry import BoundaryPatch, Grid, Region, TimeGrid
from .linops import InnerProduct, LinearMap, WeightedInner, conjugate_residual

CFL_SAFETY = 0.95

_COMPS = (0, 1, 2)


def _cyc(axis: int) -> tuple[int, int]:
    return (axis + 1) % 3, (axis + 2) % 3


def e_shape(grid: Grid, comp: int) -> tuple[int, ...]:
    s = list(grid.node_shape)
    s[comp] -= 1
    return tuple(s)


def h_shape(grid: Grid, comp: int) -> tuple[int, ...]:
    b, c = _cyc(comp)
    s = list(grid.node_shape)
    s[b] -= 1
    s[c] -= 1
    return tuple(s)


def _positions(grid: Grid, shape: tuple[int, ...], half: tuple[bool, bool, bool]) -> np.ndarray:
    axes = []
    for a in range(3):
        coords = grid.origin[a] + grid.h[a] * (np.arange(shape[a]) + (0.5 if half[a] else 0.0))
        axes.append(coords)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def e_positions(grid: Grid, comp: int) -> np.ndarray:
    half = tuple(a == comp for a in range(3))
    return _positions(grid, e_shape(grid, comp), half)


def h_positions(grid: Grid, comp: int) -> np.ndarray:
    half = tuple(a != comp for a in range(3))
    return _positions(grid, h_shape(grid, comp), half)


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------


def sample_expression(expr: dict | float, points: np.ndarray) -> np.ndarray:
    """Sample a smooth closed-form coefficient: constant plus Gaussian bumps.

    ``expr`` is a number or {"const": c, "bumps": [{"center", "width",
    "amplitude"}, ...]}; smoothness keeps the C^2 hypothesis honest.
    """
    if isinstance(expr, (int, float)):
        return np.full(points.shape[:-1], float(expr))
    out = np.full(points.shape[:-1], float(expr.get("const", 1.0)))
    for bump in expr.get("bumps", []):
        center = np.asarray(bump["center"], dtype=float)
        width = float(bump["width"])
        amp = float(bump["amplitude"])
        d2 = np.sum((points - center) ** 2, axis=-1)
        out += amp * np.exp(-d2 / (2.0 * width**2))
    return out


@dataclass
class EmCoefficients:
    """Permittivity at E-edge samples, permeability at H-face samples."""

    eps: tuple[np.ndarray, np.ndarray, np.ndarray]
    mu: tuple[np.ndarray, np.ndarray, np.ndarray]
    eps_expr: dict | float = 1.0
    mu_expr: dict | float = 1.0

    def __post_init__(self):
        for arr in (*self.eps, *self.mu):
            if np.min(arr) <= 0.0 or not np.all(np.isfinite(arr)):
                raise InvalidCoefficientError(
                    "eps and mu must be positive and finite everywhere"
                )

    @classmethod
    def from_expressions(cls, grid: Grid, eps_expr: dict | float = 1.0,
                         mu_expr: dict | float = 1.0) -> "EmCoefficients":
        eps = tuple(sample_expression(eps_expr, e_positions(grid, c)) for c in _COMPS)
        mu = tuple(sample_expression(mu_expr, h_positions(grid, c)) for c in _COMPS)
        return cls(eps=eps, mu=mu, eps_expr=eps_expr, mu_expr=mu_expr)

    def speed_at_nodes(self, grid: Grid) -> np.ndarray:
        pts = grid.node_coords()
        eps_n = sample_expression(self.eps_expr, pts)
        mu_n = sample_expression(self.mu_expr, pts)
        return 1.0 / np.sqrt(eps_n * mu_n)

    @property
    def c_max(self) -> float:
        emin = min(float(np.min(a)) for a in self.eps)
        mmin = min(float(np.min(a)) for a in self.mu)
        return 1.0 / np.sqrt(emin * mmin)


def em_cfl_max_dt(grid: Grid, coeff: EmCoefficients) -> float:
    s = np.sqrt(sum(1.0 / h**2 for h in grid.h))
    return CFL_SAFETY / (coeff.c_max * s)


# ---------------------------------------------------------------------------
# Curls and their exact transposes
# ---------------------------------------------------------------------------


def curl_e(E, h):
    """Edge E -> face-shaped curl (at H positions)."""
    Ex, Ey, Ez = E
    hx, hy, hz = h
    cx = (Ez[:, 1:, :] - Ez[:, :-1, :]) / hy - (Ey[:, :, 1:] - Ey[:, :, :-1]) / hz
    cy = (Ex[:, :, 1:] - Ex[:, :, :-1]) / hz - (Ez[1:, :, :] - Ez[:-1, :, :]) / hx
    cz = (Ey[1:, :, :] - Ey[:-1, :, :]) / hx - (Ex[:, 1:, :] - Ex[:, :-1, :]) / hy
    return cx, cy, cz


def curl_e_T(W, E_shapes, h):
    """Exact transpose of curl_e: face-shaped seeds -> edge-shaped scatter."""
    wx, wy, wz = W
    hx, hy, hz = h
    Ex = np.zeros(E_shapes[0])
    Ey = np.zeros(E_shapes[1])
    Ez = np.zeros(E_shapes[2])
    Ez[:, 1:, :] += wx / hy
    Ez[:, :-1, :] -= wx / hy
    Ey[:, :, 1:] -= wx / hz
    Ey[:, :, :-1] += wx / hz
    Ex[:, :, 1:] += wy / hz
    Ex[:, :, :-1] -= wy / hz
    Ez[1:, :, :] -= wy / hx
    Ez[:-1, :, :] += wy / hx
    Ey[1:, :, :] += wz / hx
    Ey[:-1, :, :] -= wz / hx
    Ex[:, 1:, :] -= wz / hy
    Ex[:, :-1, :] += wz / hy
    return Ex, Ey, Ez


def curl_h_interior(H, h):
    """Face H -> curl at interior E edges (those not in boundary planes)."""
    Hx, Hy, Hz = H
    hx, hy, hz = h
    cx = (Hz[:, 1:, 1:-1] - Hz[:, :-1, 1:-1]) / hy - (Hy[:, 1:-1, 1:] - Hy[:, 1:-1, :-1]) / hz
    cy = (Hx[1:-1, :, 1:] - Hx[1:-1, :, :-1]) / hz - (Hz[1:, :, 1:-1] - Hz[:-1, :, 1:-1]) / hx
    cz = (Hy[1:, 1:-1, :] - Hy[:-1, 1:-1, :]) / hx - (Hx[1:-1, 1:, :] - Hx[1:-1, :-1, :]) / hy
    return cx, cy, cz


def curl_h_interior_T(V, H_shapes, h):
    """Exact transpose of curl_h_interior: interior-E seeds -> face scatter."""
    vx, vy, vz = V
    hx, hy, hz = h
    Hx = np.zeros(H_shapes[0])
    Hy = np.zeros(H_shapes[1])
    Hz = np.zeros(H_shapes[2])
    Hz[:, 1:, 1:-1] += vx / hy
    Hz[:, :-1, 1:-1] -= vx / hy
    Hy[:, 1:-1, 1:] -= vx / hz
    Hy[:, 1:-1, :-1] += vx / hz
    Hx[1:-1, :, 1:] += vy / hz
    Hx[1:-1, :, :-1] -= vy / hz
    Hz[1:, :, 1:-1] -= vy / hx
    Hz[:-1, :, 1:-1] += vy / hx
    Hy[1:, 1:-1, :] += vz / hx
    Hy[:-1, 1:-1, :] -= vz / hx
    Hx[1:-1, 1:, :] -= vz / hy
    Hx[1:-1, :-1, :] += vz / hy
    return Hx, Hy, Hz


_E_INT_SLICES = {
    0: (slice(None), slice(1, -1), slice(1, -1)),
    1: (slice(1, -1), slice(None), slice(1, -1)),
    2: (slice(1, -1), slice(1, -1), slice(None)),
}


# ---------------------------------------------------------------------------
# Divergences
# ---------------------------------------------------------------------------


def div_eps_e(E, eps, h):
    """div(eps E) at interior nodes, shape (nx-1, ny-1, nz-1)."""
    out = 0.0
    for c in _COMPS:
        f = eps[c] * E[c]
        sl_hi = [slice(1, -1)] * 3
        sl_lo = [slice(1, -1)] * 3
        sl_hi[c] = slice(1, None)
        sl_lo[c] = slice(0, -1)
        out = out + (f[tuple(sl_hi)] - f[tuple(sl_lo)]) / h[c]
    return out


def div_mu_h(H, mu, h):
    """div(mu H) at cell centers, shape (nx, ny, nz)."""
    out = 0.0
    for c in _COMPS:
        f = mu[c] * H[c]
        sl_hi = [slice(None)] * 3
        sl_lo = [slice(None)] * 3
        sl_hi[c] = slice(1, None)
        sl_lo[c] = slice(0, -1)
        out = out + (f[tuple(sl_hi)] - f[tuple(sl_lo)]) / h[c]
    return out


def node_gradient(lam: np.ndarray, grid: Grid):
    """Node scalar -> edge-shaped gradient components."""
    out = []
    for c in _COMPS:
        sl_hi = [slice(None)] * 3
        sl_lo = [slice(None)] * 3
        sl_hi[c] = slice(1, None)
        sl_lo[c] = slice(0, -1)
        out.append((lam[tuple(sl_hi)] - lam[tuple(sl_lo)]) / grid.h[c])
    return tuple(out)


def project_div_free(
    E,
    coeff: EmCoefficients,
    grid: Grid,
    edge_masks=None,
    tol: float = 1e-13,
    maxit: int | None = None,
):
    """eps-orthogonal projection onto discretely divergence-free fields.

    Solves div(eps grad(lam)|_masked) = div(eps E) with lam = 0 on boundary
    nodes by conjugate residual iteration and returns E - grad(lam)|_masked.
    With ``edge_masks`` the projection acts within fields supported on the
    selected edges and enforces div(eps .) = 0 at every interior node.
    """
    cond = []
    for c in _COMPS:
        k = coeff.eps[c]
        if edge_masks is not None:
            k = k * edge_masks[c]
        cond.append(k)
    int_sl = (slice(1, -1),) * 3
    nshape = grid.node_shape

    def op(lam_flat):
        lam = np.zeros(nshape)
        lam[int_sl] = lam_flat.reshape(tuple(s - 2 for s in nshape))
        g = node_gradient(lam, grid)
        flux = tuple(cond[c] * g[c] for c in _COMPS)
        out = 0.0
        for c in _COMPS:
            sl_hi = [slice(1, -1)] * 3
            sl_lo = [slice(1, -1)] * 3
            sl_hi[c] = slice(1, None)
            sl_lo[c] = slice(0, -1)
            out = out - (flux[c][tuple(sl_hi)] - flux[c][tuple(sl_lo)]) / grid.h[c]
        return out.ravel()

    # E is assumed already supported on the selected edges when edge_masks
    # is given, so div(eps E) needs no masking
    rhs = -div_eps_e(E, coeff.eps, grid.h).ravel()
    field_scale = float(np.sqrt(sum(np.sum(E[c] ** 2) for c in _COMPS)))
    if np.linalg.norm(rhs) <= 1e-13 * field_scale / min(grid.h):
        return tuple(E)  # divergence already at roundoff level
    if maxit is None:
        # Poisson-type system: iterations scale with the grid diameter
        maxit = 150 * max(grid.n)
    res = conjugate_residual(op, rhs, InnerProduct(), tol, maxit, name="div-projector")
    lam = np.zeros(nshape)
    lam[int_sl] = res.x.reshape(tuple(s - 2 for s in nshape))
    g = node_gradient(lam, grid)
    out = []
    for c in _COMPS:
        corr = g[c] if edge_masks is None else g[c] * edge_masks[c]
        out.append(E[c] - corr)
    return tuple(out)


def cell_gradient(lam: np.ndarray, grid: Grid):
    """Cell scalar -> face-shaped gradient with zero ghost cells outside.

    The ghost convention is the discrete surrogate of gradients of H^1_0
    scalars on the dual (cell/face) complex.
    """
    out = []
    for c in _COMPS:
        pad = [(0, 0)] * 3
        pad[c] = (1, 1)
        lam_p = np.pad(lam, pad)
        sl_hi = [slice(None)] * 3
        sl_lo = [slice(None)] * 3
        sl_hi[c] = slice(1, None)
        sl_lo[c] = slice(0, -1)
        out.append((lam_p[tuple(sl_hi)] - lam_p[tuple(sl_lo)]) / grid.h[c])
    return tuple(out)


def project_div_free_mu(
    H,
    coeff: EmCoefficients,
    grid: Grid,
    face_masks=None,
    tol: float = 1e-13,
    maxit: int | None = None,
):
    """mu-orthogonal projection of face fields onto div(mu .) = 0 at every
    cell, the dual-complex analogue of project_div_free."""
    cond = []
    for c in _COMPS:
        k = coeff.mu[c]
        if face_masks is not None:
            k = k * face_masks[c]
        cond.append(k)
    cells = grid.n

    def op(lam_flat):
        lam = lam_flat.reshape(cells)
        g = cell_gradient(lam, grid)
        flux = tuple(cond[c] * g[c] for c in _COMPS)
        out = 0.0
        for c in _COMPS:
            sl_hi = [slice(None)] * 3
            sl_lo = [slice(None)] * 3
            sl_hi[c] = slice(1, None)
            sl_lo[c] = slice(0, -1)
            out = out - (flux[c][tuple(sl_hi)] - flux[c][tuple(sl_lo)]) / grid.h[c]
        return out.ravel()

    rhs = -div_mu_h(H, coeff.mu, grid.h).ravel()
    field_scale = float(np.sqrt(sum(np.sum(H[c] ** 2) for c in _COMPS)))
    if np.linalg.norm(rhs) <= 1e-13 * field_scale / min(grid.h):
        return tuple(H)
    if maxit is None:
        maxit = 150 * max(grid.n)
    res = conjugate_residual(op, rhs, InnerProduct(), tol, maxit, name="div-mu-projector")
    lam = res.x.reshape(cells)
    g = cell_gradient(lam, grid)
    out = []
    for c in _COMPS:
        corr = g[c] if face_masks is None else g[c] * face_masks[c]
        out.append(H[c] - corr)
    return tuple(out)


# ---------------------------------------------------------------------------
# Boundary data space
# ---------------------------------------------------------------------------


class H1TimeInner(InnerProduct):
    """Discrete H1-in-time inner product over boundary edges.

    Vectors hold the free samples at steps 1..n (step 0 is pinned to zero
    by the space), flattened from shape (n_free, n_edges):

        <u, v> = sum_k sum_e w_e (u_k - u_{k-1})(v_k - v_{k-1}) / dt.

    The Gram matrix factors as D^T (w/dt) D with D the (invertible)
    time-difference map, so gram_solve is exact via cumulative sums.
    """

    def __init__(self, edge_weights: np.ndarray, dt: float, n_free: int):
        self.w = np.asarray(edge_weights, dtype=float)
        self.dt = float(dt)
        self.n_free = int(n_free)

    def _reshape(self, u):
        return np.asarray(u).reshape(self.n_free, self.w.size)

    def dot(self, u, v) -> float:
        du = np.diff(self._reshape(u), axis=0, prepend=0.0)
        dv = np.diff(self._reshape(v), axis=0, prepend=0.0)
        return float(np.sum(self.w[None, :] * du * dv) / self.dt)

    def gram_solve(self, b: np.ndarray) -> np.ndarray:
        """Solve G x = b exactly: x = D^{-1} (dt/w) D^{-T} b."""
        b2 = self._reshape(b)
        z = np.flip(np.cumsum(np.flip(b2, axis=0), axis=0), axis=0)
        y = z * (self.dt / self.w[None, :])
        return np.cumsum(y, axis=0).ravel()


@dataclass
class EmBoundarySpace:
    """Tangential-E dofs on the Gamma faces across the time grid.

    Operator vectors hold the free time samples 1..n_free (the step-0
    sample is pinned to zero); solver-facing series carry n_free+1 rows.
    """

    grid: Grid
    timegrid: TimeGrid
    gamma: BoundaryPatch
    masks: tuple[np.ndarray, np.ndarray, np.ndarray]
    pec_masks: tuple[np.ndarray, np.ndarray, np.ndarray]
    edge_weights: np.ndarray
    n_free: int

    @property
    def n_edges(self) -> int:
        return int(sum(m.sum() for m in self.masks))

    @property
    def dim(self) -> int:
        return self.n_free * self.n_edges

    def inner(self) -> H1TimeInner:
        return H1TimeInner(self.edge_weights, self.timegrid.dt, self.n_free)

    def with_zero_start(self, vec: np.ndarray) -> np.ndarray:
        """Free-layout vector -> full series with the zero step-0 row."""
        full = np.zeros((self.n_free + 1, self.n_edges))
        full[1:] = vec.reshape(self.n_free, self.n_edges)
        return full

    def pack(self, E) -> np.ndarray:
        return np.concatenate([E[c][self.masks[c]] for c in _COMPS])

    def scatter(self, vec: np.ndarray, E) -> None:
        pos = 0
        for c in _COMPS:
            n = int(self.masks[c].sum())
            E[c][self.masks[c]] = vec[pos : pos + n]
            pos += n


def em_boundary_space(
    grid: Grid, timegrid: TimeGrid, gamma: BoundaryPatch, n_free: int | None = None
) -> EmBoundarySpace:
    """Build the tangential-edge dof layout for a union of whole faces.

    Edges shared with a non-Gamma boundary plane stay PEC (zero), so the
    dof set corresponds to the relatively open patch.
    """
    n_free = timegrid.nt if n_free is None else n_free
    gamma_faces = set(gamma.faces)
    all_faces = {(a, s) for a in range(3) for s in (0, 1)}
    masks, pecs, weights = [], [], []
    for comp in _COMPS:
        shape = e_shape(grid, comp)
        gmask = np.zeros(shape, dtype=bool)
        tang = np.zeros(shape, dtype=bool)
        nong = np.zeros(shape, dtype=bool)
        wcomp = np.zeros(shape)
        for axis, side in all_faces:
            if axis == comp:
                continue  # edges along 'comp' are normal to no 'comp' plane
            sl = [slice(None)] * 3
            sl[axis] = -1 if side else 0
            tang[tuple(sl)] = True
            if (axis, side) in gamma_faces:
                gmask[tuple(sl)] = True
                wcomp[tuple(sl)] = grid.face_area(axis)
            else:
                nong[tuple(sl)] = True
        gmask &= ~nong  # PEC wins on shared edges
        masks.append(gmask)
        pecs.append(tang & ~gmask)
        weights.append(wcomp[gmask])
    return EmBoundarySpace(
        grid=grid,
        timegrid=timegrid,
        gamma=gamma,
        masks=tuple(masks),
        pec_masks=tuple(pecs),
        edge_weights=np.concatenate(weights),
        n_free=n_free,
    )


# ---------------------------------------------------------------------------
# Movies
# ---------------------------------------------------------------------------


@dataclass
class EmFieldMovie:
    """E at integer steps (nt+1 slices), H at half steps (nt slices)."""

    E: tuple[np.ndarray, np.ndarray, np.ndarray]
    H: tuple[np.ndarray, np.ndarray, np.ndarray]
    grid: Grid
    timegrid: TimeGrid
    coeff: EmCoefficients

    def e_norm(self, region: Region | None = None, interval=None) -> float:
        return self._norm(self.E, self.coeff.eps, e_positions, region, interval, half=False)

    def h_norm(self, region: Region | None = None, interval=None) -> float:
        return self._norm(self.H, self.coeff.mu, h_positions, region, interval, half=True)

    def _norm(self, F, weights, positions, region, interval, half: bool) -> float:
        vol = self.grid.cell_volume
        dt = self.timegrid.dt
        if interval is None:
            lo, hi = 0, F[0].shape[0]
        else:
            lo = self.timegrid.index(interval[0])
            hi = self.timegrid.index(interval[1])
            if half:
                hi = min(hi, self.timegrid.nt)
        total = 0.0
        for c in _COMPS:
            if region is None:
                mask = slice(None)
            else:
                mask = region.contains(positions(self.grid, c))
            sub = F[c][lo:hi][:, mask] if region is not None else F[c][lo:hi]
            total += float(np.sum(weights[c][mask] * sub**2))
        return float(np.sqrt(vol * dt * total))


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class MaxwellSim:
    """Yee engine: forward pipeline and its exact algebraic transpose."""

    def __init__(self, grid: Grid, timegrid: TimeGrid, coeff: EmCoefficients,
                 space: EmBoundarySpace | None = None):
        if grid.dim != 3:
            raise InvalidInputError("Maxwell solver requires a 3D grid")
        dt_max = em_cfl_max_dt(grid, coeff)
        if timegrid.dt > dt_max * (1.0 + 1e-12):
            raise CflError(timegrid.dt, dt_max)
        self.grid = grid
        self.tg = timegrid
        self.coeff = coeff
        self.space = space
        self.h = grid.h
        self.e_shapes = tuple(e_shape(grid, c) for c in _COMPS)
        self.h_shapes = tuple(h_shape(grid, c) for c in _COMPS)
        self.inv_mu = tuple(1.0 / coeff.mu[c] for c in _COMPS)
        self.inv_eps_int = tuple(
            1.0 / coeff.eps[c][_E_INT_SLICES[c]] for c in _COMPS
        )
        # all tangential boundary edges (zeroed each step unless injected)
        self._tang = []
        for comp in _COMPS:
            t = np.zeros(self.e_shapes[comp], dtype=bool)
            for axis in _COMPS:
                if axis == comp:
                    continue
                for side in (0, 1):
                    sl = [slice(None)] * 3
                    sl[axis] = -1 if side else 0
                    t[tuple(sl)] = True
            self._tang.append(t)

    def _alloc(self, N, shapes, extra=1):
        return tuple(np.zeros((N + extra,) + s) for s in shapes)

    def forward(self, f=None, je=None, jm=None, nt_stop=None):
        """Returns (E movies, H movies): E has N+1 slices, H has N.

        f: (N+1, n_gamma_edges); je: tuple of (N, *e_shape) at half steps;
        jm: tuple of (N, *h_shape) at integer steps.
        """
        N = self.tg.nt if nt_stop is None else int(nt_stop)
        dt = self.tg.dt
        E = self._alloc(N, self.e_shapes)
        H = self._alloc(N - 1, self.h_shapes)
        if f is not None:
            cur = [np.zeros(s) for s in self.e_shapes]
            self.space.scatter(f[0], cur)
            for c in _COMPS:
                E[c][0] = cur[c]
        for n in range(N):
            en = tuple(E[c][n] for c in _COMPS)
            ce = curl_e(en, self.h)
            for c in _COMPS:
                prev = H[c][n - 1] if n > 0 else 0.0
                rhs = -ce[c]
                if jm is not None:
                    rhs = rhs + jm[c][n]
                H[c][n] = prev + dt * self.inv_mu[c] * rhs
            hn = tuple(H[c][n] for c in _COMPS)
            ch = curl_h_interior(hn, self.h)
            for c in _COMPS:
                rhs = ch[c]
                if je is not None:
                    rhs = rhs + je[c][n][_E_INT_SLICES[c]]
                E[c][n + 1][_E_INT_SLICES[c]] = (
                    E[c][n][_E_INT_SLICES[c]] + dt * self.inv_eps_int[c] * rhs
                )
                # tangential boundary edges: PEC zero unless injected
            if f is not None:
                cur = [E[c][n + 1] for c in _COMPS]
                self.space.scatter(f[n + 1], cur)
        return E, H

    def transpose(self, seedsE, seedsH, need_f=False, need_je=False,
                  need_jm=False, nt_stop=None):
        """Exact transpose of ``forward`` as a map (f, je, jm) -> movies.

        seedsE/seedsH are movie-shaped accumulators (mutated in place).
        """
        N = self.tg.nt if nt_stop is None else int(nt_stop)
        dt = self.tg.dt
        f_adj = np.zeros((N + 1, self.space.n_edges)) if need_f else None
        je_adj = self._alloc(N - 1, self.e_shapes) if need_je else None
        jm_adj = self._alloc(N - 1, self.h_shapes) if need_jm else None
        for n in range(N - 1, -1, -1):
            lamE_next = [seedsE[c][n + 1] for c in _COMPS]
            if need_f:
                f_adj[n + 1] = self.space.pack(lamE_next)
            mu_int = []
            for c in _COMPS:
                m = lamE_next[c][_E_INT_SLICES[c]]
                mu_int.append(m)
                seedsE[c][n][_E_INT_SLICES[c]] += m
            scaled = tuple(dt * self.inv_eps_int[c] * mu_int[c] for c in _COMPS)
            if need_je:
                for c in _COMPS:
                    je_adj[c][n][_E_INT_SLICES[c]] = scaled[c]
            hscat = curl_h_interior_T(scaled, self.h_shapes, self.h)
            for c in _COMPS:
                seedsH[c][n] += hscat[c]
            lamH = tuple(seedsH[c][n] for c in _COMPS)
            if need_jm:
                for c in _COMPS:
                    jm_adj[c][n] = dt * self.inv_mu[c] * lamH[c]
            escat = curl_e_T(
                tuple(-dt * self.inv_mu[c] * lamH[c] for c in _COMPS),
                self.e_shapes,
                self.h,
            )
            for c in _COMPS:
                seedsE[c][n] += escat[c]
                if n > 0:
                    seedsH[c][n - 1] += seedsH[c][n]
        if need_f:
            f_adj[0] = self.space.pack([seedsE[c][0] for c in _COMPS])
        return f_adj, je_adj, jm_adj


# ---------------------------------------------------------------------------
# Public solves
# ---------------------------------------------------------------------------


def forward_maxwell(
    f: np.ndarray,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    gamma: BoundaryPatch,
) -> EmFieldMovie:
    """Solve the tangential-E driven system; f has shape (nt+1, n_edges)
    with f[0] = 0 (packed per em_boundary_space)."""
    space = em_boundary_space(grid, timegrid, gamma)
    f = np.asarray(f, dtype=float)
    if f.shape != (timegrid.nt + 1, space.n_edges):
        raise InvalidInputError(
            f"boundary series shape {f.shape} != {(timegrid.nt + 1, space.n_edges)}"
        )
    if np.any(f[0] != 0.0):
        raise InvalidInputError("boundary data must vanish at step 0")
    sim = MaxwellSim(grid, timegrid, coeff, space)
    E, H = sim.forward(f=f)
    return EmFieldMovie(E=E, H=H, grid=grid, timegrid=timegrid, coeff=coeff)


def _cumtrapz_from_T(arr: np.ndarray, dt: float) -> np.ndarray:
    """S[n] = integral from T to t_n over the leading axis (so S[nt] = 0)."""
    out = np.zeros_like(arr)
    incr = 0.5 * dt * (arr[1:] + arr[:-1])
    np.cumsum(incr, axis=0, out=out[1:])
    return out - out[-1]


def _cumtrapz_from_T_T(adj: np.ndarray, dt: float) -> np.ndarray:
    """Exact transpose of _cumtrapz_from_T."""
    # S[p] = -sum_{k>=p} w_k with w_k = dt/2 (a_k + a_{k+1})
    w_adj = -np.cumsum(adj[:-1], axis=0)
    out = np.zeros_like(adj)
    out[:-1] += 0.5 * dt * w_adj
    out[1:] += 0.5 * dt * w_adj
    return out


def _half_from_int(arr: np.ndarray) -> np.ndarray:
    return 0.5 * (arr[:-1] + arr[1:])


def _half_from_int_T(adj: np.ndarray) -> np.ndarray:
    out = np.zeros((adj.shape[0] + 1,) + adj.shape[1:])
    out[:-1] += 0.5 * adj
    out[1:] += 0.5 * adj
    return out


def adjoint_maxwell_solve(
    j1,
    j2,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
) -> EmFieldMovie:
    """Backward system with sources eps*S_T[j1], mu*S_T[j2], zero terminal
    data and PEC boundary, via time-reversal conjugation of the forward
    scheme (E even, H odd under reversal).

    j1/j2 are edge/face component tuples sampled at integer steps
    ((nt+1, *shape) each) or None.
    """
    sim = MaxwellSim(grid, timegrid, coeff, em_boundary_space(grid, timegrid, _empty_patch(grid)))
    nt = timegrid.nt
    dt = timegrid.dt
    je = jm = None
    if j1 is not None:
        je = []
        for c in _COMPS:
            S = _cumtrapz_from_T(coeff.eps[c] * j1[c], dt)
            Sh = _half_from_int(S)
            je.append(-Sh[::-1])  # conjugated slot m <-> original half step nt-1-m
        je = tuple(je)
    if j2 is not None:
        jm = []
        for c in _COMPS:
            S = _cumtrapz_from_T(coeff.mu[c] * j2[c], dt)
            jm.append(S[nt - np.arange(nt)])  # slot m <-> original step nt-m
        jm = tuple(jm)
    Ep, Hp = sim.forward(je=je, jm=jm)
    E = tuple(Ep[c][::-1].copy() for c in _COMPS)
    H = tuple(-Hp[c][::-1].copy() for c in _COMPS)
    return EmFieldMovie(E=E, H=H, grid=grid, timegrid=timegrid, coeff=coeff)


def _empty_patch(grid: Grid) -> BoundaryPatch:
    mask = np.zeros(grid.node_shape, dtype=bool)
    return BoundaryPatch(faces=(), node_mask=mask, area=np.zeros(grid.node_shape))


# ---------------------------------------------------------------------------
# Restricted solution operators
# ---------------------------------------------------------------------------


def region_edge_masks(grid: Grid, region: Region):
    return tuple(region.contains(e_positions(grid, c)) for c in _COMPS)


def region_face_masks(grid: Grid, region: Region):
    return tuple(region.contains(h_positions(grid, c)) for c in _COMPS)


def make_em_ops(
    window,
    which: str,
    gamma: BoundaryPatch,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    adjoint_mode: str = "exact",
) -> LinearMap:
    """Restricted solution operators of the boundary-driven system.

    which='L' restricts (E, H) with the eps+mu weighted product, 'E'
    restricts E (eps product), 'H' restricts H (mu product).  The domain
    carries the H1-in-time boundary product.
    """
    if which not in ("L", "E", "H"):
        raise InvalidInputError(f"unknown operator kind {which!r}")
    if adjoint_mode not in ("exact", "continuous"):
        raise InvalidInputError(f"unknown adjoint_mode {adjoint_mode!r}")
    space = em_boundary_space(grid, timegrid, gamma)
    sim = MaxwellSim(grid, timegrid, coeff, space)
    nt = timegrid.nt
    dt = timegrid.dt
    vol = grid.cell_volume
    ia, ib = window.steps(timegrid)
    ibh = min(ib, nt)  # H slices carry half-step times
    emasks = region_edge_masks(grid, window.region)
    fmasks = region_face_masks(grid, window.region)
    ne = int(sum(m.sum() for m in emasks))
    nh = int(sum(m.sum() for m in fmasks))
    n_esteps = max(ib - ia, 0)
    n_hsteps = max(ibh - ia, 0)
    use_e = which in ("L", "E")
    use_h = which in ("L", "H")
    dim_out = (n_esteps * ne if use_e else 0) + (n_hsteps * nh if use_h else 0)

    w_out = []
    if use_e:
        we = np.concatenate([coeff.eps[c][emasks[c]] for c in _COMPS]) * vol * dt
        w_out.append(np.tile(we, n_esteps))
    if use_h:
        wh = np.concatenate([coeff.mu[c][fmasks[c]] for c in _COMPS]) * vol * dt
        w_out.append(np.tile(wh, n_hsteps))
    w_out = np.concatenate(w_out) if w_out else np.zeros(0)

    def gather(E, H) -> np.ndarray:
        parts = []
        if use_e:
            for n in range(ia, ib):
                parts.append(np.concatenate([E[c][n][emasks[c]] for c in _COMPS]))
        if use_h:
            for m in range(ia, ibh):
                parts.append(np.concatenate([H[c][m][fmasks[c]] for c in _COMPS]))
        return np.concatenate(parts) if parts else np.zeros(0)

    def scatter(yvec, seedsE, seedsH) -> None:
        pos = 0
        if use_e:
            for n in range(ia, ib):
                for c in _COMPS:
                    k = int(emasks[c].sum())
                    seedsE[c][n][emasks[c]] = yvec[pos : pos + k]
                    pos += k
        if use_h:
            for m in range(ia, ibh):
                for c in _COMPS:
                    k = int(fmasks[c].sum())
                    seedsH[c][m][fmasks[c]] = yvec[pos : pos + k]
                    pos += k

    def apply(fvec: np.ndarray) -> np.ndarray:
        f = space.with_zero_start(fvec)
        E, H = sim.forward(f=f)
        return gather(E, H)

    inner_in = space.inner()

    def adjoint_exact(yvec: np.ndarray) -> np.ndarray:
        seedsE = sim._alloc(nt, sim.e_shapes)
        seedsH = sim._alloc(nt - 1, sim.h_shapes)
        scatter(w_out * yvec if yvec.size else yvec, seedsE, seedsH)
        f_adj, _, _ = sim.transpose(seedsE, seedsH, need_f=True)
        return inner_in.gram_solve(f_adj[1:].ravel())

    def adjoint_continuous(yvec: np.ndarray) -> np.ndarray:
        j1 = tuple(np.zeros((nt + 1,) + sim.e_shapes[c]) for c in _COMPS)
        j2 = tuple(np.zeros((nt,) + sim.h_shapes[c]) for c in _COMPS)
        pos = 0
        if use_e:
            for n in range(ia, ib):
                for c in _COMPS:
                    k = int(emasks[c].sum())
                    j1[c][n][emasks[c]] = yvec[pos : pos + k]
                    pos += k
        if use_h:
            for m in range(ia, ibh):
                for c in _COMPS:
                    k = int(fmasks[c].sum())
                    j2[c][m][fmasks[c]] = yvec[pos : pos + k]
                    pos += k
        # H-density given at half steps; resample to the integer grid
        j2_int = tuple(_half_from_int_T(j2[c]) for c in _COMPS)
        movie = adjoint_maxwell_solve(j1, j2_int, coeff, grid, timegrid)
        Zh = tangential_h_trace(movie.H, space, grid)
        # S_0 on the staggered record: midpoint rule matches the Yee pairing
        S = np.zeros((nt + 1, space.n_edges))
        np.cumsum(dt * Zh, axis=0, out=S[1:])
        return S[1:].ravel()

    return LinearMap(
        apply=apply,
        adjoint_apply=adjoint_exact if adjoint_mode == "exact" else adjoint_continuous,
        dim_in=space.dim,
        dim_out=dim_out,
        inner_in=inner_in,
        inner_out=WeightedInner(w_out),
        name=f"{which}[{adjoint_mode}]",
    )


def tangential_h_trace(H, space: EmBoundarySpace, grid: Grid) -> np.ndarray:
    """Pairing-partner trace of tangential H on the Gamma faces, one row
    per half step, in the tangential-E dof layout.

    For a face with outward normal s*e_a and cyclic axes (a, b, c), the
    function paired with (E_b, E_c) in the boundary term of the adjoint
    identity is (-s H_c, +s H_b), each read half a cell inside.
    """
    nH = H[0].shape[0]
    out = np.zeros((nH, space.n_edges))
    for m in range(nH):
        vals = [np.zeros(e_shape(grid, c)) for c in range(3)]
        for axis, side in space.gamma.faces:
            b, c = _cyc(axis)
            s = 1.0 if side else -1.0
            sl = [slice(None)] * 3
            sl[axis] = -1 if side else 0
            vals[b][tuple(sl)] = -s * H[c][m][tuple(sl)]
            vals[c][tuple(sl)] = +s * H[b][m][tuple(sl)]
        out[m] = space.pack(vals)
    return out


def make_T_sigma_tau(
    sigma: float,
    tau: float,
    region_b: Region,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    m_edge_masks=None,
    projector_tol: float = 1e-13,
) -> LinearMap:
    """Radiating-source final-time operator: interior current j1 on
    B x (sigma, sigma+tau) -> divergence-free part of the backward-system
    E snapshot at t=sigma, restricted to M^(tau).
    """
    dt = timegrid.dt
    nt = timegrid.nt
    i_sig = int(round(sigma / dt))
    i_top = int(round((sigma + tau) / dt))
    if not (0 < i_sig < i_top <= nt):
        raise InvalidInputError(
            f"need 0 < sigma < sigma+tau <= T after snapping, got steps ({i_sig}, {i_top})"
        )
    if m_edge_masks is None:
        from .geometry import distance_from_region
        dmap = distance_from_region(grid, coeff.speed_at_nodes(grid), region_b)
        dist_region = Region(mask=dmap.d < tau, descriptor={"type": "box", "lo": (0,) * 3, "hi": (0,) * 3})
        m_edge_masks = []
        for c in _COMPS:
            pts = e_positions(grid, c)
            # nearest-node travel-time distance, outside B, away from the wall
            idx = tuple(
                np.clip(np.round((pts[..., a] - grid.origin[a]) / grid.h[a]).astype(int),
                        0, grid.node_shape[a] - 1)
                for a in range(3)
            )
            near = dmap.d[idx] < tau
            inside_b = region_b.contains(pts)
            interior = np.ones(pts.shape[:-1], dtype=bool)
            for a in range(3):
                lo = grid.origin[a] + 0.25 * grid.h[a]
                hi = grid.origin[a] + grid.extent[a] - 0.25 * grid.h[a]
                interior &= (pts[..., a] > lo) & (pts[..., a] < hi)
            m_edge_masks.append(near & ~inside_b & interior)
        m_edge_masks = tuple(m_edge_masks)
    if not any(m.any() for m in m_edge_masks):
        raise InvalidInputError("M^(tau) selects no edges; tau too small for the mesh")

    b_masks = region_edge_masks(grid, region_b)
    nb = int(sum(m.sum() for m in b_masks))
    nm = int(sum(m.sum() for m in m_edge_masks))
    if nb == 0:
        raise InvalidInputError("region B selects no edges")
    n_in_steps = i_top - i_sig
    sim = MaxwellSim(grid, timegrid, coeff, em_boundary_space(grid, timegrid, _empty_patch(grid)))
    vol = grid.cell_volume
    w_in = np.tile(np.concatenate([coeff.eps[c][b_masks[c]] for c in _COMPS]) * vol * dt, n_in_steps)
    w_out = np.concatenate([coeff.eps[c][m_edge_masks[c]] for c in _COMPS]) * vol
    nt_run = nt - i_sig  # conjugated forward run length

    def project_m(Evec_fields):
        return project_div_free(Evec_fields, coeff, grid, edge_masks=m_edge_masks,
                                tol=projector_tol)

    def apply(jvec: np.ndarray) -> np.ndarray:
        j2d = jvec.reshape(n_in_steps, nb)
        je = []
        pos_c = np.cumsum([0] + [int(b_masks[c].sum()) for c in _COMPS])
        for c in _COMPS:
            full = np.zeros((nt + 1,) + sim.e_shapes[c])
            for s in range(n_in_steps):
                full[i_sig + s][b_masks[c]] = j2d[s, pos_c[c]:pos_c[c + 1]]
            S = _cumtrapz_from_T(coeff.eps[c] * full, dt)
            Sh = _half_from_int(S)  # (nt, shape)
            jec = -Sh[::-1]  # conjugated source, slot m <-> half-step nt-1-m
            je.append(jec[:nt_run])
        Ep, _ = sim.forward(je=tuple(je), nt_stop=nt_run)
        snap = tuple(Ep[c][nt_run].copy() for c in _COMPS)
        restricted = tuple(snap[c] * m_edge_masks[c] for c in _COMPS)
        proj = project_m(restricted)
        return np.concatenate([proj[c][m_edge_masks[c]] for c in _COMPS])

    def adjoint(yvec: np.ndarray) -> np.ndarray:
        y_fields = tuple(np.zeros(sim.e_shapes[c]) for c in _COMPS)
        pos = 0
        for c in _COMPS:
            k = int(m_edge_masks[c].sum())
            y_fields[c][m_edge_masks[c]] = yvec[pos : pos + k]
            pos += k
        pf = project_m(y_fields)
        seedsE = sim._alloc(nt_run, sim.e_shapes)
        seedsH = sim._alloc(nt_run - 1, sim.h_shapes)
        for c in _COMPS:
            seedsE[c][nt_run] = vol * coeff.eps[c] * (pf[c] * m_edge_masks[c])
        _, je_adj, _ = sim.transpose(seedsE, seedsH, need_je=True, nt_stop=nt_run)
        out = np.zeros((n_in_steps, nb))
        pos_c = np.cumsum([0] + [int(b_masks[c].sum()) for c in _COMPS])
        for c in _COMPS:
            jec_adj = np.zeros((nt,) + sim.e_shapes[c])
            jec_adj[:nt_run] = je_adj[c]
            Sh_adj = -jec_adj[::-1]
            S_adj = _half_from_int_T(Sh_adj)
            full_adj = coeff.eps[c] * _cumtrapz_from_T_T(S_adj, dt)
            for s in range(n_in_steps):
                out[s, pos_c[c]:pos_c[c + 1]] = full_adj[i_sig + s][b_masks[c]]
        return out.ravel() / w_in

    op = LinearMap(
        apply=apply,
        adjoint_apply=adjoint,
        dim_in=n_in_steps * nb,
        dim_out=nm,
        inner_in=WeightedInner(w_in),
        inner_out=WeightedInner(w_out),
        name="T_sigma_tau",
    )
    op.m_edge_masks = m_edge_masks
    op.b_masks = b_masks
    op.steps = (i_sig, i_top)
    return op


def make_T_sigma_tau_h(
    sigma: float,
    tau: float,
    region_b: Region,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    m_face_masks=None,
    projector_tol: float = 1e-13,
) -> LinearMap:
    """H-field analogue of make_T_sigma_tau: interior current j2 on
    B x (sigma, sigma+tau) -> div(mu .)-free part of the backward-system
    H snapshot near t=sigma, restricted to M^(tau) (mu-weighted complex).
    """
    dt = timegrid.dt
    nt = timegrid.nt
    i_sig = int(round(sigma / dt))
    i_top = int(round((sigma + tau) / dt))
    if not (0 < i_sig < i_top <= nt):
        raise InvalidInputError(
            f"need 0 < sigma < sigma+tau <= T after snapping, got steps ({i_sig}, {i_top})"
        )
    if m_face_masks is None:
        from .geometry import distance_from_region
        dmap = distance_from_region(grid, coeff.speed_at_nodes(grid), region_b)
        m_face_masks = []
        for c in _COMPS:
            pts = h_positions(grid, c)
            idx = tuple(
                np.clip(np.round((pts[..., a] - grid.origin[a]) / grid.h[a]).astype(int),
                        0, grid.node_shape[a] - 1)
                for a in range(3)
            )
            near = dmap.d[idx] < tau
            inside_b = region_b.contains(pts)
            interior = np.ones(pts.shape[:-1], dtype=bool)
            for a in range(3):
                lo = grid.origin[a] + 0.25 * grid.h[a]
                hi = grid.origin[a] + grid.extent[a] - 0.25 * grid.h[a]
                interior &= (pts[..., a] > lo) & (pts[..., a] < hi)
            m_face_masks.append(near & ~inside_b & interior)
        m_face_masks = tuple(m_face_masks)
    if not any(m.any() for m in m_face_masks):
        raise InvalidInputError("M^(tau) selects no faces; tau too small for the mesh")

    b_masks = region_face_masks(grid, region_b)
    nb = int(sum(m.sum() for m in b_masks))
    nm = int(sum(m.sum() for m in m_face_masks))
    if nb == 0:
        raise InvalidInputError("region B selects no faces")
    n_in_steps = i_top - i_sig
    sim = MaxwellSim(grid, timegrid, coeff, em_boundary_space(grid, timegrid, _empty_patch(grid)))
    vol = grid.cell_volume
    w_in = np.tile(np.concatenate([coeff.mu[c][b_masks[c]] for c in _COMPS]) * vol * dt, n_in_steps)
    w_out = np.concatenate([coeff.mu[c][m_face_masks[c]] for c in _COMPS]) * vol
    nt_run = nt - i_sig

    def project_m(fields):
        return project_div_free_mu(fields, coeff, grid, face_masks=m_face_masks,
                                   tol=projector_tol)

    def apply(jvec: np.ndarray) -> np.ndarray:
        j2d = jvec.reshape(n_in_steps, nb)
        jm = []
        pos_c = np.cumsum([0] + [int(b_masks[c].sum()) for c in _COMPS])
        for c in _COMPS:
            full = np.zeros((nt + 1,) + sim.h_shapes[c])
            for s in range(n_in_steps):
                full[i_sig + s][b_masks[c]] = j2d[s, pos_c[c]:pos_c[c + 1]]
            S = _cumtrapz_from_T(coeff.mu[c] * full, dt)
            jm.append(S[nt - np.arange(nt_run)])  # conjugated slot m <-> step nt-m
        _, Hp = sim.forward(jm=tuple(jm), nt_stop=nt_run)
        snap = tuple(-Hp[c][nt_run - 1] for c in _COMPS)
        restricted = tuple(snap[c] * m_face_masks[c] for c in _COMPS)
        proj = project_m(restricted)
        return np.concatenate([proj[c][m_face_masks[c]] for c in _COMPS])

    def adjoint(yvec: np.ndarray) -> np.ndarray:
        y_fields = tuple(np.zeros(sim.h_shapes[c]) for c in _COMPS)
        pos = 0
        for c in _COMPS:
            k = int(m_face_masks[c].sum())
            y_fields[c][m_face_masks[c]] = yvec[pos : pos + k]
            pos += k
        pf = project_m(y_fields)
        seedsE = sim._alloc(nt_run, sim.e_shapes)
        seedsH = sim._alloc(nt_run - 1, sim.h_shapes)
        for c in _COMPS:
            seedsH[c][nt_run - 1] = -vol * coeff.mu[c] * (pf[c] * m_face_masks[c])
        _, _, jm_adj = sim.transpose(seedsE, seedsH, need_jm=True, nt_stop=nt_run)
        out = np.zeros((n_in_steps, nb))
        pos_c = np.cumsum([0] + [int(b_masks[c].sum()) for c in _COMPS])
        for c in _COMPS:
            S_adj = np.zeros((nt + 1,) + sim.h_shapes[c])
            for m in range(nt_run):
                S_adj[nt - m] += jm_adj[c][m]
            full_adj = coeff.mu[c] * _cumtrapz_from_T_T(S_adj, dt)
            for s in range(n_in_steps):
                out[s, pos_c[c]:pos_c[c + 1]] = full_adj[i_sig + s][b_masks[c]]
        return out.ravel() / w_in

    op = LinearMap(
        apply=apply,
        adjoint_apply=adjoint,
        dim_in=n_in_steps * nb,
        dim_out=nm,
        inner_in=WeightedInner(w_in),
        inner_out=WeightedInner(w_out),
        name="T_sigma_tau_h",
    )
    op.m_face_masks = m_face_masks
    op.b_masks = b_masks
    op.steps = (i_sig, i_top)
    return op


def make_em_P_op(
    tau: float,
    gamma: BoundaryPatch,
    coeff: EmCoefficients,
    grid: Grid,
    timegrid: TimeGrid,
    projector_tol: float = 1e-13,
) -> LinearMap:
    """Final-time map of boundary data: f on Gamma x (0, tau) -> the
    divergence-free E snapshot at t=tau over the whole domain."""
    dt = timegrid.dt
    i_tau = int(round(tau / dt))
    if not (0 < i_tau <= timegrid.nt):
        raise InvalidInputError(f"tau={tau} snaps outside the time grid")
    space = em_boundary_space(grid, timegrid, gamma, n_free=i_tau)
    sim = MaxwellSim(grid, timegrid, coeff, space)
    vol = grid.cell_volume
    w_out = np.concatenate([coeff.eps[c].ravel() for c in _COMPS]) * vol
    dims_e = [int(np.prod(sim.e_shapes[c])) for c in _COMPS]

    def apply(fvec: np.ndarray) -> np.ndarray:
        f = space.with_zero_start(fvec)
        E, _ = sim.forward(f=f, nt_stop=i_tau)
        snap = tuple(E[c][i_tau] for c in _COMPS)
        proj = project_div_free(snap, coeff, grid, tol=projector_tol)
        return np.concatenate([proj[c].ravel() for c in _COMPS])

    inner_in = space.inner()

    def adjoint(yvec: np.ndarray) -> np.ndarray:
        fields = []
        pos = 0
        for c in _COMPS:
            fields.append(yvec[pos : pos + dims_e[c]].reshape(sim.e_shapes[c]))
            pos += dims_e[c]
        pf = project_div_free(tuple(fields), coeff, grid, tol=projector_tol)
        seedsE = sim._alloc(i_tau, sim.e_shapes)
        seedsH = sim._alloc(i_tau - 1, sim.h_shapes)
        for c in _COMPS:
            seedsE[c][i_tau] = vol * coeff.eps[c] * pf[c]
        f_adj, _, _ = sim.transpose(seedsE, seedsH, need_f=True, nt_stop=i_tau)
        return inner_in.gram_solve(f_adj[1:].ravel())

    op = LinearMap(
        apply=apply,
        adjoint_apply=adjoint,
        dim_in=space.dim,
        dim_out=sum(dims_e),
        inner_in=inner_in,
        inner_out=WeightedInner(w_out),
        name="P_tau_em",
    )
    op.i_tau = i_tau
    op.space = space
    return op


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def maxwell_energy(movie: EmFieldMovie) -> np.ndarray:
    """Discrete Yee energy W^{n+1/2} = (vol/2)[<eps E^{n+1}, E^n> +
    <mu H^{n+1/2}, H^{n+1/2}>], exactly conserved once injection stops."""
    grid = movie.grid
    vol = grid.cell_volume
    nH = movie.H[0].shape[0]
    out = np.zeros(nH)
    for c in _COMPS:
        eps = movie.coeff.eps[c]
        mu = movie.coeff.mu[c]
        E = movie.E[c]
        H = movie.H[c]
        axes = tuple(range(1, 4))
        out += 0.5 * vol * np.sum(eps * E[1:] * E[:-1], axis=axes)[:nH]
        out += 0.5 * vol * np.sum(mu * H * H, axis=axes)
    return out


def interior_divergence_defects(movie: EmFieldMovie, margin: int = 2):
    """Max |div(eps E)| and |div(mu H)| over steps, away from the boundary."""
    grid = movie.grid
    h = grid.h
    e_max = 0.0
    h_max = 0.0
    core_e = (slice(margin - 1, None if margin == 1 else -(margin - 1)),) * 3 if margin > 1 else (slice(None),) * 3
    core_h = (slice(margin, -margin),) * 3
    for n in range(movie.E[0].shape[0]):
        dE = div_eps_e(tuple(movie.E[c][n] for c in _COMPS), movie.coeff.eps, h)
        e_max = max(e_max, float(np.max(np.abs(dE[core_e]))))
    for m in range(movie.H[0].shape[0]):
        dH = div_mu_h(tuple(movie.H[c][m] for c in _COMPS), movie.coeff.mu, h)
        h_max = max(h_max, float(np.max(np.abs(dH[core_h]))))
    return e_max, h_max
