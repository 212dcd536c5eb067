import numpy as np
import pytest

from edscat.direct import scattering_coefficients
from edscat.inverse import invert
from edscat.model import (PotentialPair, ScatteringMatrixData, SpatialGrid, SpectralGrid,
                          Variant, build_triplets)

# q = exp(-x^2), r = exp(-x^2)/2 and the grids used for inversion throughout
GAUSS_GRID = SpatialGrid(-8.0, 8.0, 801)
INVERSION_GRID = SpatialGrid(-8.0, 8.0, 161)
GAUSS_SPECTRAL = SpectralGrid(np.linspace(-40.0, 40.0, 800))


def gaussian_pair(grid=GAUSS_GRID, a=1.0, b=0.5) -> PotentialPair:
    x = grid.x
    g = np.exp(-x ** 2)
    return PotentialPair(grid, a * g, b * g, Variant.QR)


def planted_data(lam=np.linspace(-2000.0, 2000.0, 40000)) -> ScatteringMatrixData:
    """Reflectionless data with bound states i (c = 2) and -i (cbar = 2).

    T_uv = (lam + i)/(lam - i), so exp(i mu/2) = T_uv(0) = -1.
    """
    phase = -1.0
    t_uv = (lam + 1j) / (lam - 1j)
    z = np.zeros(lam.size, complex)
    trip = build_triplets([(1j, 2.0)], [(-1j, 2.0)])
    return ScatteringMatrixData(SpectralGrid(lam), T=t_uv / phase, R=z, L=z, Tbar=phase / t_uv,
                                Rbar=z, Lbar=z, variant=Variant.QR, bound_states=trip)


@pytest.fixture(scope="session")
def gauss():
    return gaussian_pair()


@pytest.fixture(scope="session")
def gauss_data(gauss):
    return scattering_coefficients(gauss, GAUSS_SPECTRAL)


@pytest.fixture(scope="session")
def gauss_inversion(gauss_data):
    return invert(gauss_data, INVERSION_GRID)


@pytest.fixture(scope="session")
def planted():
    data = planted_data()
    return data, invert(data, SpatialGrid(-12.0, 12.0, 961))
