"""Shared fixtures for the test suite

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

import numpy as np
import pytest

from modules.config import DEFAULT_NUMERICS
from modules.detector import engineer_embedded_state
from modules.grids_quadrature import make_radial_grid
from modules.local_potential import exponential_potential, free_potential, manufactured_potential


@pytest.fixture(scope="session")
def numerics():
    return DEFAULT_NUMERICS


@pytest.fixture(scope="session")
def grid():
    return make_radial_grid()


@pytest.fixture(scope="session")
def free_V(grid):
    return free_potential(grid)


@pytest.fixture(scope="session")
def manufactured_V(grid):
    return manufactured_potential(grid)


@pytest.fixture(scope="session")
def smooth_V(grid):
    return exponential_potential(1.0, 1.0, grid)


@pytest.fixture(scope="session")
def engineered(numerics, grid):
    """(FormFactor, amplitude) with an embedded state at k = 1 for epsilon = -1"""
    return engineer_embedded_state(1.0, 2.0, -1.0, numerics, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20250101)
