"""Shared fixtures: small grids, model specs and smooth random fields."""

import numpy as np
import pytest

from rigidlid.models import AbcdParams, ModelKind, ModelSpec
from rigidlid.spectra import Grid, backward, bump_profile, forward


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def grid1d():
    return Grid(dim=1, modes_per_axis=128, length_per_axis=40.0)


@pytest.fixture
def grid2d():
    return Grid(dim=2, modes_per_axis=32, length_per_axis=20.0)


@pytest.fixture
def classical1d():
    return ModelSpec(kind=ModelKind.CLASSICAL, dim=1, eps=0.1, mu=1.0)


@pytest.fixture
def classical2d():
    return ModelSpec(kind=ModelKind.CLASSICAL, dim=2, eps=0.1, mu=1.0)


@pytest.fixture
def sum_zero_abcd():
    """a + b + c + d = 0 with a nonvanishing pair product."""
    return AbcdParams(a=-1.0 / 6.0, b=0.5, c=-1.0 / 3.0, d=0.0)


@pytest.fixture
def smooth_field(rng):
    """Factory for band-limited random real fields on a grid."""

    def make(grid, components=None):
        shape = grid.shape if components is None else (components,) + grid.shape
        noise = rng.standard_normal(shape)
        envelope = bump_profile(grid.wavenumber_magnitude() / (0.5 * grid.max_wavenumber()))
        return backward(forward(noise, grid) * envelope, grid)

    return make
