import numpy as np
import pytest

from hartreelab.model import Field, GridSpec, ModelParams, make_gaussian
from hartreelab.spectral import SpectralEngine


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32, 12.0)


@pytest.fixture(scope="session")
def engine32(grid32):
    return SpectralEngine(grid32)


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16, 10.0)


@pytest.fixture(scope="session")
def engine16(grid16):
    return SpectralEngine(grid16)


@pytest.fixture(scope="session")
def params_p3():
    return ModelParams(D=3, p=3.0, omega=1.0)


@pytest.fixture(scope="session")
def params_p2():
    return ModelParams(D=3, p=2.0, omega=1.0)


def smooth_complex_field(grid, rng, width_range=(0.8, 2.0), n_bumps=3):
    """Localized random smooth field: a few complex Gaussian bumps."""
    ax = grid.axis()
    vals = np.zeros(grid.shape, dtype=np.complex128)
    for _ in range(n_bumps):
        a = rng.uniform(0.2, 1.0) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        s = rng.uniform(*width_range)
        c = rng.uniform(-1.5, 1.5, size=3)
        r2 = ((ax - c[0])[:, None, None] ** 2 + (ax - c[1])[None, :, None] ** 2
              + (ax - c[2])[None, None, :] ** 2)
        vals += a * np.exp(-r2 / (2 * s**2))
    return Field(grid, vals)


@pytest.fixture(scope="session")
def ground_p3_32(params_p3, grid32, engine32):
    """Standing-wave ground state at p=3, omega=1 on the coarse grid (cached)."""
    from hartreelab.groundstate import solve_ground_eq15

    return solve_ground_eq15(params_p3, grid32, engine32, tol=1e-6, max_iter=3000,
                             seed=make_gaussian(grid32, 2.0, 1.0))
