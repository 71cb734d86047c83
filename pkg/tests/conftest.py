import functools

import numpy as np
import pytest

from qssts.mesh import build_annulus_mesh, circle

R, R_STAR, F = 1.0, 0.5, 1.0
G = F / (R * np.log(R / R_STAR))


@functools.lru_cache(maxsize=None)
def annulus(r: float, h: float, n_layers=None):
    """Concentric benchmark mesh: Sigma the unit circle, Gamma a circle of radius r."""
    n = max(16, int(round(2 * np.pi * r / h)))
    return build_annulus_mesh(R, circle(r, n), h, n_layers)


@pytest.fixture(scope="session")
def mesh_05():
    return annulus(0.5, 0.05)


@pytest.fixture(scope="session")
def mesh_09():
    return annulus(0.9, 0.05)
