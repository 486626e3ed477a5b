"""Orthonormal column sets from products of Householder reflections.

Each reflection ``H_k = I - 2 u u^T`` with ``u = (0_k, e^(k))`` is driven by a
unit vector ``e^(k)`` in ``R^(m-k)`` written in hyperspherical angles, so any
angle assignment yields ``Q^T Q = I`` without constraints.
"""
from __future__ import annotations

import numpy as np


def n_angles(m: int, n: int) -> int:
    """Degrees of freedom ``m n - n (n + 1) / 2``."""
    _check_dims(m, n)
    return m * n - n * (n + 1) // 2


def _check_dims(m: int, n: int) -> None:
    if not 0 < n <= m:
        raise ValueError(f"need 0 < n <= m, got m={m}, n={n}")


def angle_slices(m: int, n: int) -> list:
    """Slices of the flat angle array belonging to each reflection ``k``."""
    _check_dims(m, n)
    out, pos = [], 0
    for k in range(n):
        ln = m - k - 1
        out.append(slice(pos, pos + ln))
        pos += ln
    return out


def unit_vector(phi) -> np.ndarray:
    """Point on the unit sphere in ``R^(len(phi)+1)``."""
    phi = np.asarray(phi, dtype=float)
    d = len(phi) + 1
    e = np.ones(d)
    if d == 1:
        return e
    s = np.concatenate([[1.0], np.cumprod(np.sin(phi))])
    e[:-1] = s[:-1] * np.cos(phi)
    e[-1] = s[-1]
    return e


def sphere_angles(e) -> np.ndarray:
    """Inverse of :func:`unit_vector`, angles folded into ``[0, 2 pi)``."""
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    d = len(e)
    phi = np.zeros(d - 1)
    for i in range(d - 2):
        phi[i] = np.arctan2(np.linalg.norm(e[i + 1:]), e[i])
    if d >= 2:
        phi[d - 2] = np.arctan2(e[d - 1], e[d - 2])
    return np.mod(phi, 2 * np.pi)


def householder_vectors(angles, m: int, n: int) -> np.ndarray:
    """``Q = H_0 H_1 ... H_{n-1} I_{m x n}``; columns are the orthonormal vectors."""
    angles = np.asarray(angles, dtype=float).ravel()
    if len(angles) != n_angles(m, n):
        raise ValueError(f"expected {n_angles(m, n)} angles for m={m}, n={n}, got {len(angles)}")
    q = np.eye(m, n)
    for k, sl in reversed(list(enumerate(angle_slices(m, n)))):
        e = unit_vector(angles[sl])
        q[k:] -= 2.0 * np.outer(e, e @ q[k:])
    return q


def angles_from_vectors(q) -> tuple[np.ndarray, np.ndarray]:
    """Angles reproducing ``q`` up to row signs.

    Returns ``(angles, row_sign)`` with ``householder_vectors(angles) ==
    row_sign[:, None] * q``.  A row sign other than +1 is only needed when
    ``n == m`` and the determinant of ``q`` is fixed by the parametrization.
    """
    q = np.array(q, dtype=float)
    m, n = q.shape
    _check_dims(m, n)
    if not np.allclose(q.T @ q, np.eye(n), atol=1e-9):
        raise ValueError("columns are not orthonormal")
    row_sign = np.ones(m)
    if n == m and np.linalg.det(q) * (-1) ** m < 0:
        # a product of m reflections has determinant (-1)^m
        row_sign[0] = -1.0
    work = row_sign[:, None] * q
    out = []
    for k in range(n):
        t = work[k:, k]
        d = m - k
        if d == 1:
            break
        e0 = np.zeros(d)
        e0[0] = 1.0
        diff = e0 - t
        nd = np.linalg.norm(diff)
        if nd < 1e-12:
            e = np.zeros(d)
            e[1] = 1.0
        else:
            e = diff / nd
        out.append(sphere_angles(e))
        work[k:] -= 2.0 * np.outer(e, e @ work[k:])
    return np.concatenate(out) if out else np.zeros(0), row_sign
