import time

import numpy as np
import pytest

from travelwave.grid import Grid2D
from travelwave.orlicz import make_kerr_nonlinearity
from travelwave.variational import PermittivityProfile, SolverSettings, VariationalProblem


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid32():
    return Grid2D.square(32, 4.0)


@pytest.fixture
def grid64():
    return Grid2D.square(64, 8.0)


# wall-clock seconds of the shared solves, reported by the acceptance suite
TIMINGS = {}


def smooth_field(grid, rng, ncomp=6, width=1.5):
    """Random combination of shifted Gaussians, negligible at the box edge."""
    X1, X2 = grid.coords()
    out = np.zeros((ncomp, *grid.shape))
    for c in range(ncomp):
        for _ in range(3):
            x0 = rng.uniform(-1, 1, 2)
            amp = rng.uniform(-1, 1)
            out[c] += amp * np.exp(-((X1 - x0[0]) ** 2 + (X2 - x0[1]) ** 2) / width**2)
    return out


def kerr_problem(n=128, R=12.0, k=1.0, omega=1.0, V=0.5, chi3=1.0, symmetry="tm"):
    return VariationalProblem(Grid2D.square(n, R), k, PermittivityProfile.constant(V),
                              make_kerr_nonlinearity(omega, chi3), symmetry)


@pytest.fixture(scope="session")
def default_problem():
    return kerr_problem()


@pytest.fixture(scope="session")
def tm_states():
    """Two certified TM states on the default configuration (shared by several modules)."""
    from travelwave.variational import higher_state_search

    start = time.perf_counter()
    prob = kerr_problem()
    points, log = higher_state_search(prob, SolverSettings(states=2, seed=0))
    TIMINGS["tm_states"] = time.perf_counter() - start
    return prob, points, log


@pytest.fixture(scope="session")
def kerr_rescaled():
    """Ground states of the default problem with ``f`` scaled by 0.5 and by 2."""
    from travelwave.variational import mountain_pass_search, rescaled

    start = time.perf_counter()
    prob = kerr_problem()
    out = {lam: mountain_pass_search(rescaled(prob, lam), SolverSettings(seed=0)) for lam in (0.5, 2.0)}
    TIMINGS["kerr_rescaled"] = time.perf_counter() - start
    return out
