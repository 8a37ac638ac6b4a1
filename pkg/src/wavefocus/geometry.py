"""Grids, regions, boundary patches, and travel-time distance maps.

The computational domain is an axis-aligned box discretized by a uniform
tensor grid.  Fields live on the grid nodes; regions are node masks built
from ball/box/union descriptors; boundary patches are unions of whole box
faces.  Distances are measured in the travel-time metric with line element
|dx|/c(x) and are computed with a first-order upwind fast-marching solver
for |grad d| = 1/c.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyRegionError,
    InvalidCoefficientError,
    InvalidInputError,
)

# Guard against accidentally huge allocations (nodes per grid).
NODE_BUDGET = 2**26

FACE_NAMES = ("x-", "x+", "y-", "y+", "z-", "z+")


@dataclass(frozen=True)
class Grid:
    """Uniform axis-aligned grid: ``n`` cells per axis, spacing ``h``.

    Nodes sit at ``origin + i*h`` with ``0 <= i <= n`` per axis, so the
    node array has shape ``tuple(n_a + 1)``.
    """

    n: tuple[int, ...]
    h: tuple[float, ...]
    origin: tuple[float, ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        h = tuple(float(v) for v in self.h)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", h)
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * len(n))
        else:
            object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        if len(n) not in (2, 3):
            raise InvalidInputError(f"grid must be 2D or 3D, got dim={len(n)}")
        if len(h) != len(n) or len(self.origin) != len(n):
            raise InvalidInputError("n, h, origin must have equal length")
        if any(v < 4 for v in n):
            raise InvalidInputError(f"need at least 4 cells per axis, got n={n}")
        if any(v <= 0 for v in h):
            raise InvalidInputError(f"spacings must be positive, got h={h}")
        if self.num_nodes > NODE_BUDGET:
            raise InvalidInputError(
                f"grid with {self.num_nodes} nodes exceeds budget {NODE_BUDGET}"
            )

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def node_shape(self) -> tuple[int, ...]:
        return tuple(v + 1 for v in self.n)

    @property
    def num_nodes(self) -> int:
        return int(np.prod([v + 1 for v in self.n]))

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(n * h for n, h in zip(self.n, self.h))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h[axis] * np.arange(self.n[axis] + 1)

    def node_coords(self) -> np.ndarray:
        """Coordinates of every node, shape ``node_shape + (dim,)``."""
        axes = [self.axis_coords(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.node_shape, dtype=bool)
        m[(slice(1, -1),) * self.dim] = True
        return m

    def boundary_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    def face_area(self, axis: int) -> float:
        """Area element of a boundary face orthogonal to ``axis``."""
        return float(np.prod([self.h[a] for a in range(self.dim) if a != axis]))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with ``nt`` steps of size ``dt`` (nt+1 samples)."""

    nt: int
    dt: float

    def __post_init__(self):
        if self.nt < 1 or self.dt <= 0:
            raise InvalidInputError(f"bad time grid nt={self.nt}, dt={self.dt}")

    @property
    def T(self) -> float:
        return self.nt * self.dt

    def index(self, t: float) -> int:
        """Nearest step index for time ``t`` (snapping), clipped to range."""
        return int(np.clip(round(t / self.dt), 0, self.nt))

    def snap(self, t: float) -> float:
        return self.index(t) * self.dt


def descriptor_contains(descriptor: dict, points: np.ndarray) -> np.ndarray:
    """Membership of ``points`` (shape (..., dim)) in a shape descriptor.

    Descriptors: {"type": "ball", "center", "radius"},
    {"type": "box", "lo", "hi"}, {"type": "union", "parts": [...]}.
    """
    kind = descriptor.get("type")
    if kind == "ball":
        center = np.asarray(descriptor["center"], dtype=float)
        radius = float(descriptor["radius"])
        d2 = np.sum((points - center) ** 2, axis=-1)
        return d2 < radius**2  # regions are open sets
    if kind == "box":
        lo = np.asarray(descriptor["lo"], dtype=float)
        hi = np.asarray(descriptor["hi"], dtype=float)
        return np.all((points > lo) & (points < hi), axis=-1)
    if kind == "union":
        parts = descriptor.get("parts", [])
        if not parts:
            raise InvalidInputError("union descriptor needs at least one part")
        out = descriptor_contains(parts[0], points)
        for p in parts[1:]:
            out |= descriptor_contains(p, points)
        return out
    raise InvalidInputError(f"unknown region descriptor type {kind!r}")


def _descriptor_bounds(descriptor: dict) -> tuple[np.ndarray, np.ndarray]:
    kind = descriptor.get("type")
    if kind == "ball":
        c = np.asarray(descriptor["center"], dtype=float)
        r = float(descriptor["radius"])
        return c - r, c + r
    if kind == "box":
        return (
            np.asarray(descriptor["lo"], dtype=float),
            np.asarray(descriptor["hi"], dtype=float),
        )
    if kind == "union":
        los, his = zip(*(_descriptor_bounds(p) for p in descriptor["parts"]))
        return np.min(los, axis=0), np.max(his, axis=0)
    raise InvalidInputError(f"unknown region descriptor type {kind!r}")


@dataclass(frozen=True)
class Region:
    """Node mask over a grid plus the descriptor it was built from."""

    mask: np.ndarray
    descriptor: dict

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Descriptor membership at arbitrary points (staggered samples)."""
        return descriptor_contains(self.descriptor, points)

    def overlaps(self, other: "Region") -> bool:
        return bool(np.any(self.mask & other.mask))


def build_region(grid: Grid, descriptor: dict, require_interior: bool = False) -> Region:
    """Mask all grid nodes inside the shape described by ``descriptor``."""
    pts = grid.node_coords()
    mask = descriptor_contains(descriptor, pts)
    if not mask.any():
        raise EmptyRegionError(f"descriptor {descriptor} selects no grid nodes")
    if require_interior:
        lo, hi = _descriptor_bounds(descriptor)
        box_lo = np.asarray(grid.origin)
        box_hi = box_lo + np.asarray(grid.extent)
        if np.any(lo <= box_lo) or np.any(hi >= box_hi):
            raise InvalidInputError(
                f"descriptor {descriptor} is not strictly inside the domain box"
            )
        if np.any(mask & grid.boundary_mask()):
            raise InvalidInputError("interior region touches boundary nodes")
    return Region(mask=mask, descriptor=descriptor)


@dataclass(frozen=True)
class BoundaryPatch:
    """Union of whole box faces; carries node mask and per-node area weight."""

    faces: tuple[tuple[int, int], ...]  # (axis, side) with side in {0, 1}
    node_mask: np.ndarray
    area: np.ndarray  # per node of the grid, nonzero exactly on the patch

    @property
    def num_nodes(self) -> int:
        return int(self.node_mask.sum())

    def node_area_weights(self) -> np.ndarray:
        """Area weight per patch node, in ``node_mask`` flat order."""
        return self.area[self.node_mask]


def _parse_face(name: str, dim: int) -> tuple[int, int]:
    name = name.strip().lower()
    if len(name) != 2 or name[0] not in "xyz" or name[1] not in "+-":
        raise InvalidInputError(f"bad face name {name!r}; use e.g. 'x-' or 'y+'")
    axis = "xyz".index(name[0])
    if axis >= dim:
        raise InvalidInputError(f"face {name!r} invalid for dim={dim}")
    return axis, (1 if name[1] == "+" else 0)


def boundary_patch(grid: Grid, faces: Iterable[str] | str = "all") -> BoundaryPatch:
    """Boundary patch from face names ('x-', 'y+', ...) or 'all'."""
    if isinstance(faces, str):
        if faces == "all":
            faces = FACE_NAMES[: 2 * grid.dim]
        else:
            faces = [faces]
    parsed = tuple(_parse_face(f, grid.dim) for f in faces)
    if not parsed:
        raise InvalidInputError("boundary patch needs at least one face")
    mask = np.zeros(grid.node_shape, dtype=bool)
    area = np.zeros(grid.node_shape, dtype=float)
    for axis, side in parsed:
        idx = [slice(None)] * grid.dim
        idx[axis] = -1 if side else 0
        mask[tuple(idx)] = True
        # piecewise-constant per-node share of the face area; nodes shared by
        # several faces keep the last face's weight (corner set has measure
        # ~h of the patch and weights stay O(h^{d-1}))
        area[tuple(idx)] = grid.face_area(axis)
    return BoundaryPatch(faces=parsed, node_mask=mask, area=area)


# ---------------------------------------------------------------------------
# Fast marching
# ---------------------------------------------------------------------------

_FAR, _TRIAL, _KNOWN = 0, 1, 2


def _solve_update(dvals: list[float], hs: list[float], s: float) -> float:
    """Solve sum_a ((x - d_a)/h_a)^2 = s^2 for the largest root x,
    using the standard subset reduction (drop axes with d_a >= x)."""
    order = np.argsort(dvals)
    best = np.inf
    for m in range(len(order), 0, -1):
        ds = [dvals[i] for i in order[:m]]
        hh = [hs[i] for i in order[:m]]
        a = sum(1.0 / h**2 for h in hh)
        b = -2.0 * sum(d / h**2 for d, h in zip(ds, hh))
        c = sum(d**2 / h**2 for d, h in zip(ds, hh)) - s**2
        disc = b * b - 4 * a * c
        if disc < 0:
            continue
        x = (-b + np.sqrt(disc)) / (2 * a)
        if x >= ds[-1]:  # causality: x must dominate every axis used
            best = x
            break
    if not np.isfinite(best):
        # fall back to one-axis update from the smallest neighbor
        i = order[0]
        best = dvals[i] + s * hs[i]
    return float(best)


def fast_march(grid: Grid, speed: np.ndarray, seed_mask: np.ndarray) -> np.ndarray:
    """First-order upwind fast marching for |grad d| = 1/speed, d=0 on seeds."""
    speed = np.asarray(speed, dtype=float)
    if speed.shape != grid.node_shape:
        raise InvalidInputError("speed array must be node-shaped")
    if np.min(speed) <= 0:
        raise InvalidCoefficientError("speed must be positive everywhere")
    if not seed_mask.any():
        raise InvalidInputError("fast marching needs a nonempty seed set")

    shape = grid.node_shape
    d = np.full(shape, np.inf)
    state = np.full(shape, _FAR, dtype=np.int8)
    slowness = 1.0 / speed

    heap: list[tuple[float, tuple[int, ...]]] = []
    for idx in zip(*np.nonzero(seed_mask)):
        d[idx] = 0.0
        state[idx] = _TRIAL
        heapq.heappush(heap, (0.0, idx))

    dim = grid.dim
    while heap:
        dv, idx = heapq.heappop(heap)
        if state[idx] == _KNOWN or dv > d[idx]:
            continue
        state[idx] = _KNOWN
        for axis in range(dim):
            for step in (-1, 1):
                nb = list(idx)
                nb[axis] += step
                if nb[axis] < 0 or nb[axis] >= shape[axis]:
                    continue
                nb = tuple(nb)
                if state[nb] == _KNOWN:
                    continue
                dvals, hs = [], []
                for a in range(dim):
                    best = np.inf
                    for st in (-1, 1):
                        mm = list(nb)
                        mm[a] += st
                        if 0 <= mm[a] < shape[a]:
                            mm = tuple(mm)
                            if state[mm] == _KNOWN and d[mm] < best:
                                best = d[mm]
                    if np.isfinite(best):
                        dvals.append(best)
                        hs.append(grid.h[a])
                if not dvals:
                    continue
                cand = _solve_update(dvals, hs, slowness[nb])
                if cand < d[nb]:
                    d[nb] = cand
                    state[nb] = _TRIAL
                    heapq.heappush(heap, (cand, nb))
    return d


@dataclass(frozen=True)
class TravelTimeMap:
    """Per-node travel-time distance d(x) to a seed set (d=0 on seeds)."""

    d: np.ndarray
    seed_mask: np.ndarray

    @property
    def dist_omega_gamma(self) -> float:
        return float(np.max(self.d))

    def max_inside(self, mask: np.ndarray) -> float:
        return float(np.max(self.d[mask]))


def travel_time_map(grid: Grid, speed: np.ndarray, gamma: BoundaryPatch) -> TravelTimeMap:
    """Travel-time distance to the boundary patch in the metric |dx|/c."""
    d = fast_march(grid, speed, gamma.node_mask)
    return TravelTimeMap(d=d, seed_mask=gamma.node_mask)


def distance_from_region(grid: Grid, speed: np.ndarray, region: Region) -> TravelTimeMap:
    """Travel-time distance to the region interface (nodes of the region
    adjacent to its complement).  Inside the region this measures depth
    (its max is the inradius); outside it measures dist(x, boundary of B)."""
    mask = region.mask
    interface = np.zeros_like(mask)
    for axis in range(grid.dim):
        for step in (-1, 1):
            shifted = np.full_like(mask, False)
            src = [slice(None)] * grid.dim
            dst = [slice(None)] * grid.dim
            if step == 1:
                src[axis] = slice(1, None)
                dst[axis] = slice(0, -1)
            else:
                src[axis] = slice(0, -1)
                dst[axis] = slice(1, None)
            shifted[tuple(dst)] = ~mask[tuple(src)]
            interface |= mask & shifted
    # region nodes on the domain boundary also sit on the interface of B
    interface |= mask & grid.boundary_mask()
    if not interface.any():
        raise InvalidInputError("region has no interface nodes")
    d = fast_march(grid, speed, interface)
    return TravelTimeMap(d=d, seed_mask=interface)


def region_inradius(grid: Grid, speed: np.ndarray, region: Region) -> float:
    """sup over x in B of dist(x, boundary of B) in the travel-time metric."""
    return distance_from_region(grid, speed, region).max_inside(region.mask)


# ---------------------------------------------------------------------------
# Feasibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    name: str
    measured: float
    bound: float
    passed: bool

    def describe(self) -> str:
        rel = "<" if self.passed else "!<"
        return f"{self.name}: {self.measured:.6g} {rel} {self.bound:.6g}"


@dataclass(frozen=True)
class FeasibilityReport:
    mode: str
    target_window: tuple[float, float]
    suppress_window: tuple[float, float] | None
    conditions: tuple[Condition, ...]
    dist_omega_gamma: float
    inradius: float | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __str__(self) -> str:
        status = "feasible" if self.passed else "infeasible"
        parts = "; ".join(c.describe() for c in self.conditions)
        return f"[{self.mode}] {status}: {parts}"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "target_window": list(self.target_window),
            "suppress_window": (
                list(self.suppress_window) if self.suppress_window else None
            ),
            "dist_omega_gamma": self.dist_omega_gamma,
            "inradius": self.inradius,
            "passed": self.passed,
            "conditions": [
                {
                    "name": c.name,
                    "measured": c.measured,
                    "bound": c.bound,
                    "passed": c.passed,
                }
                for c in self.conditions
            ],
        }


def _check_window(w: Sequence[float], T: float, name: str):
    a, b = float(w[0]), float(w[1])
    if not (0.0 <= a < b <= T + 1e-12):
        raise InvalidInputError(f"{name} window ({a}, {b}) not well-ordered in [0, {T}]")
    return a, b


def check_feasibility(
    ttm: TravelTimeMap,
    mode: str,
    target_window: Sequence[float],
    T: float,
    suppress_window: Sequence[float] | None = None,
    inradius: float | None = None,
) -> FeasibilityReport:
    """Evaluate the travel-time conditions for the requested localization mode.

    Pure diagnostic: returns a report, never raises on failed conditions.
    Modes: 'space' needs dist(Omega, Gamma) < b; 'time-I' (suppress before
    target) needs dist(Omega, Gamma) < b - d; 'time-II' (suppress after)
    needs dist(Omega, Gamma) < b and inradius(B) < (c - b)/2.
    """
    a, b = _check_window(target_window, T, "target")
    dog = ttm.dist_omega_gamma
    conds: list[Condition] = []
    sw = None
    if mode == "space":
        conds.append(Condition("dist(Omega,Gamma) < b", dog, b, dog < b))
    elif mode == "time-I":
        if suppress_window is None:
            raise InvalidInputError("time-I needs a suppression window")
        c, dd = _check_window(suppress_window, T, "suppress")
        sw = (c, dd)
        if dd > a:
            raise InvalidInputError(
                f"time-I requires the suppression window before the target (d={dd} > a={a})"
            )
        conds.append(
            Condition("dist(Omega,Gamma) < b - d", dog, b - dd, dog < b - dd)
        )
    elif mode == "time-II":
        if suppress_window is None or inradius is None:
            raise InvalidInputError("time-II needs a suppression window and inradius")
        c, dd = _check_window(suppress_window, T, "suppress")
        sw = (c, dd)
        if c < b:
            raise InvalidInputError(
                f"time-II requires the suppression window after the target (c={c} < b={b})"
            )
        conds.append(Condition("dist(Omega,Gamma) < b", dog, b, dog < b))
        conds.append(
            Condition(
                "inradius(B) < (c - b)/2",
                inradius,
                (c - b) / 2.0,
                inradius < (c - b) / 2.0,
            )
        )
    else:
        raise InvalidInputError(f"unknown feasibility mode {mode!r}")
    return FeasibilityReport(
        mode=mode,
        target_window=(a, b),
        suppress_window=sw,
        conditions=tuple(conds),
        dist_omega_gamma=dog,
        inradius=inradius,
    )
