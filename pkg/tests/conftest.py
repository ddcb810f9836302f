import numpy as np
import pytest

from app.grid import Domain, Family, Field, State, make_grid


@pytest.fixture
def unit_domain():
    return Domain(0.0, 1.0, 0.0, 1.0)


@pytest.fixture(params=[Family.MID_POINT, Family.REGULAR], ids=['mid', 'regular'])
def family(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def smooth_field(grid, rng, modes=4):
    """Random combination of the first few cosine modes of the grid's domain."""
    x, y = grid.mesh()
    dom = grid.domain
    data = np.zeros(grid.shape)
    for j in range(modes):
        for k in range(min(modes, grid.ny)):
            data += rng.normal() / (1 + j + k) ** 2 * (
                np.cos(j * np.pi * (x - dom.a) / (dom.b - dom.a))
                * np.cos(k * np.pi * (y - dom.c) / (dom.d - dom.c))
            )
    return Field(grid, data)


@pytest.fixture
def small_grid(family):
    return make_grid(Domain(0.0, 2 * np.pi, 0.0, np.pi), family, 16, 8)


@pytest.fixture
def smooth_state(small_grid, rng):
    return State(smooth_field(small_grid, rng), smooth_field(small_grid, rng))
