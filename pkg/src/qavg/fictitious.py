"""Quadratic fictitious density of states and its phase-estimation signature."""
from __future__ import annotations

import numpy as np

from .qpe import QpeSetting

_SERIES_TERMS = 14
_SERIES_RADIUS = 5.0


def rho_quad(u, width: float) -> np.ndarray:
    """Normalized parabola on ``[-width/2, width/2]``, centered at 0."""
    if width <= 0:
        raise ValueError("width must be positive for a density; use a pole for width 0")
    a = width / 2
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= a, 0.75 / a * (1 - (u / a) ** 2), 0.0)


def gquad(z, e0, width):
    """``int rho_quad(E - e0) / (z - E) dE`` in closed form.

    Width 0 gives the simple pole ``1 / (z - e0)``.  Far from the support the
    logarithms are replaced by their Taylor series to avoid cancellation.
    """
    z = np.asarray(z, dtype=complex)
    e0 = np.asarray(e0, dtype=float)
    width = np.asarray(width, dtype=float)
    z, e0, width = np.broadcast_arrays(z, e0, width)
    out = np.empty(z.shape, dtype=complex)
    pole = width == 0
    out[pole] = 1.0 / (z[pole] - e0[pole])
    rest = ~pole
    if np.any(rest):
        w = width[rest]
        zt = (z[rest] - e0[rest]) / w
        val = np.empty(zt.shape, dtype=complex)
        far = np.abs(zt) > _SERIES_RADIUS
        y = 1.0 / (2.0 * zt[far])
        y2 = y * y
        acc = np.zeros(y.shape, dtype=complex)
        for k in range(_SERIES_TERMS, 0, -1):
            acc = acc * y2 + 1.0 / ((2 * k - 1) * (2 * k + 1))
        val[far] = y * acc
        near = ~far
        zn = zt[near]
        val[near] = zn + (zn * zn - 0.25) * (np.log(zn - 0.5) - np.log(zn + 0.5))
        out[rest] = 6.0 / w * val
    return out


def char_quad(q, width) -> np.ndarray:
    """Characteristic function ``int rho_quad(u) exp(i q u) du`` (real, even)."""
    x = np.asarray(q, dtype=float) * np.asarray(width, dtype=float) / 2
    out = np.ones(np.broadcast(x).shape)
    small = np.abs(x) < 1e-2
    xs = x[small]
    out[small] = 1 - xs**2 / 10 + xs**4 / 280
    xl = x[~small]
    out[~small] = 3 * (np.sin(xl) - xl * np.cos(xl)) / xl**3
    return out


def channel_kernel(e0, width, setting: QpeSetting) -> np.ndarray:
    """Readout distribution of a channel spread by ``rho_quad`` around ``e0``.

    The Fejer kernel is a finite Fourier series, so averaging it over the
    parabola only multiplies each harmonic by :func:`char_quad`.  Accepts
    arrays of centers/widths and returns ``(..., N)``.
    """
    e0 = np.asarray(e0, dtype=float)
    width = np.asarray(width, dtype=float)
    e0, width = np.broadcast_arrays(e0, width)
    n = setting.n_val
    s = np.arange(-(n - 1), n)
    theta = 2 * np.pi * s / n
    coef = (n - np.abs(s)) * char_quad(theta[None, :] * setting.t0, width.reshape(-1, 1))
    coef = coef * np.exp(1j * theta[None, :] * ((e0.reshape(-1, 1) - setting.e_orig) * setting.t0))
    folded = np.zeros((coef.shape[0], n), dtype=complex)
    folded[:, :n] = coef[:, n - 1:]
    folded[:, 1:] += coef[:, :n - 1]
    k = np.fft.fft(folded, axis=1).real / n**2
    return k.reshape(e0.shape + (n,))
