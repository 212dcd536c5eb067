"""Small quadrature and finite-difference helpers shared across modules.

Everything here works on uniformly spaced samples.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_simpson

# 5-point one-sided first-derivative stencils (4th order), offsets 0..4
_LEFT0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_LEFT1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def derivative(f, h: float) -> np.ndarray:
    """First derivative of uniformly sampled ``f`` to 4th order.

    Central 5-point stencil in the interior, one-sided 5-point stencils at
    the two nodes nearest each end.  Falls back to ``np.gradient`` (2nd
    order) when fewer than 5 samples are available.
    """
    f = np.asarray(f)
    n = f.shape[0]
    if n < 5:
        if n < 2:
            return np.zeros_like(f)
        return np.gradient(f, h, axis=0)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    out[0] = _LEFT0 @ f[:5] / h
    out[1] = _LEFT1 @ f[:5] / h
    out[-1] = -(_LEFT0 @ f[-1:-6:-1]) / h
    out[-2] = -(_LEFT1 @ f[-1:-6:-1]) / h
    return out


def differentiation_matrix(n: int, h: float) -> np.ndarray:
    """Dense matrix ``D`` with ``D @ f == derivative(f, h)``."""
    return derivative(np.eye(n), h)


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for ``n`` (odd) equally spaced nodes."""
    if n == 1:
        return np.zeros(1)
    if n % 2 == 0:
        raise ValueError("composite Simpson needs an even number of panels")
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


def cumulative(f, h: float) -> np.ndarray:
    """Running integral ``int_{x_0}^{x_j} f`` by cumulative Simpson."""
    f = np.asarray(f)
    if f.shape[0] < 3:
        z = np.zeros((1,) + f.shape[1:], dtype=f.dtype)
        return np.concatenate((z, np.cumsum(0.5 * h * (f[1:] + f[:-1]), axis=0)))
    if np.iscomplexobj(f):
        # scipy's cumulative Simpson casts to real
        return (cumulative_simpson(f.real, dx=h, axis=0, initial=0)
                + 1j * cumulative_simpson(f.imag, dx=h, axis=0, initial=0))
    return cumulative_simpson(f, dx=h, axis=0, initial=0)


def tail(f, h: float) -> np.ndarray:
    """Tail integral ``int_{x_j}^{x_end} f`` (everything past the end taken as 0)."""
    f = np.asarray(f)
    return cumulative(f[::-1], h)[::-1]
