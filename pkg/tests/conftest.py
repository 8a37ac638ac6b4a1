from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from wavefocus.geometry import Grid, TimeGrid, boundary_patch, build_region
from wavefocus.wave import CoefficientField, cfl_max_dt

settings.register_profile("ci", derandomize=True, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def grid24():
    return Grid(n=(24, 24), h=(1 / 24, 1 / 24))


@pytest.fixture
def unit_coeff(grid24):
    return CoefficientField.constant(grid24, c=1.0, q=0.0)


def make_timegrid(grid, coeff, T, cfl_frac=1.0):
    dt = cfl_max_dt(grid, coeff) * cfl_frac
    nt = int(np.ceil(T / dt))
    return TimeGrid(nt=nt, dt=T / nt)


@pytest.fixture
def left_edge(grid24):
    return boundary_patch(grid24, ["x-"])


@pytest.fixture
def ball_b(grid24):
    return build_region(grid24, {"type": "ball", "center": (0.3, 0.5), "radius": 0.12})
