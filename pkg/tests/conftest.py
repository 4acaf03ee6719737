import numpy as np
import pytest

from esbgk.gaussians import gaussian_values
from esbgk.moments import MacroState
from esbgk.phase_grid import ModelParams, auto_bounds, build_grid


def bimodal(grid, d=3):
    """Two shifted anisotropic Gaussians with different internal temperatures."""
    shift = np.zeros(d)
    shift[0] = 0.8
    cov1 = np.diag([0.6, 0.9, 1.2][:d])
    cov2 = np.diag([1.1, 0.7, 0.8][:d])
    return (gaussian_values(0.5, shift, cov1, 0.7, grid)
            + gaussian_values(0.5, -shift, cov2, 1.3, grid))


def unit_state(d, delta=2.0, T=1.0):
    return MacroState.from_primitives(1.0, np.zeros(d), T * np.eye(d), T, delta)


@pytest.fixture(scope="session")
def grid1():
    """d = 1 default grid around a unit Maxwellian."""
    p = ModelParams(1, 2.0, 0.3, 0.5, 1.0)
    return build_grid(auto_bounds(unit_state(1), p), p), p


@pytest.fixture(scope="session")
def grid2_small():
    """Coarse d = 2 grid, enough for moment and step checks."""
    p = ModelParams(2, 2.0, 0.5, 0.5, 1.0)
    spec = auto_bounds(unit_state(2), p, counts=(48, 96))
    return build_grid(spec, p), p


@pytest.fixture(scope="session")
def grid3():
    """d = 3 default grid around a unit Maxwellian."""
    p = ModelParams(3, 2.0, 0.5, 0.5, 1.0)
    return build_grid(auto_bounds(unit_state(3), p), p), p
