import numpy as np
import pytest

from micropolar import Grid, ScalarField, State, VectorField, to_spectral
from micropolar.harness import GeneratorSpec, generate_initial


def real_scalar(grid, fn):
    x = grid.coordinates()
    return ScalarField(grid, np.broadcast_to(fn(*x), grid.shape).copy())


def real_vector(grid, fns):
    x = grid.coordinates()
    return VectorField(grid, np.stack([np.broadcast_to(f(*x), grid.shape) for f in fns]))


def taylor_green(n=32):
    return generate_initial(GeneratorSpec("TaylorGreen"), Grid(n))


def random_state(n=16, seed=0, slope=1.0, omega=1.0):
    return generate_initial(GeneratorSpec("RandomDivFree", slope=slope, omega_amplitude=omega), Grid(n), seed)


def random_vector(grid, seed, band=True):
    """Random real vector field (spectral), optionally restricted to the dealiasing band."""
    rng = np.random.default_rng(seed)
    v = to_spectral(VectorField(grid, rng.standard_normal((3, *grid.shape))))
    if band:
        v = VectorField(grid, v.data * grid.dealias_mask(), True)
    return v


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture
def grid16():
    return Grid(16)


@pytest.fixture
def grid32():
    return Grid(32)


def zero_state(grid):
    z = VectorField(grid, np.zeros((3, *grid.shape)), True)
    return State(z, z, 0.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
