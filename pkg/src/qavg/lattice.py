"""Lattice providers for the DMFT loop: k-resolved Hamiltonians and a Bethe toy."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


def _embed(sigma_corr: np.ndarray, corr_mask, n_wan: int) -> np.ndarray:
    """Place a ``(..., n_corr, n_corr)`` self-energy into ``(..., n_wan, n_wan)``."""
    out = np.zeros(sigma_corr.shape[:-2] + (n_wan, n_wan), dtype=complex)
    idx = np.asarray(corr_mask)
    out[..., idx[:, None], idx[None, :]] = sigma_corr
    return out


@dataclass(frozen=True)
class LatticeHamiltonian:
    """``H_KS(k)`` on a weighted k mesh; ``corr_mask`` selects the correlated orbitals."""

    weights: np.ndarray
    hk: np.ndarray
    corr_mask: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1) > 1e-10:
            raise ValueError(f"k weights sum to {w.sum()}, expected 1")
        hk = np.asarray(self.hk)
        if hk.ndim != 3 or hk.shape[1] != hk.shape[2] or hk.shape[0] != len(w):
            raise ValueError("hk must have shape (n_k, n_wan, n_wan)")
        if not np.allclose(hk, np.conj(np.swapaxes(hk, 1, 2)), atol=1e-10):
            raise ValueError("H_KS(k) is not Hermitian")
        if not set(self.corr_mask) <= set(range(hk.shape[1])):
            raise ValueError("corr_mask outside orbital range")

    @property
    def n_wan(self) -> int:
        return self.hk.shape[1]

    @property
    def n_corr(self) -> int:
        return len(self.corr_mask)

    def h_corr_local(self) -> np.ndarray:
        hloc = np.einsum("k,kij->ij", self.weights, self.hk)
        idx = np.asarray(self.corr_mask)
        return hloc[np.ix_(idx, idx)]

    def lattice_gf(self, z, mu: float, sigma_corr) -> np.ndarray:
        """``(n_k, n_z, n_wan, n_wan)`` lattice Green's function."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        sig = _embed(np.asarray(sigma_corr, dtype=complex).reshape(len(z), self.n_corr, self.n_corr),
                     self.corr_mask, self.n_wan)
        eye = np.eye(self.n_wan)
        out = np.empty((len(self.weights), len(z), self.n_wan, self.n_wan), dtype=complex)
        for ik, h in enumerate(self.hk):
            a = (z + mu)[:, None, None] * eye - h[None] - sig
            out[ik] = _checked_inv(a, f"k-point {ik}")
        return out

    def local_gf(self, z, mu: float, sigma_corr) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        sig = _embed(np.asarray(sigma_corr, dtype=complex).reshape(len(z), self.n_corr, self.n_corr),
                     self.corr_mask, self.n_wan)
        eye = np.eye(self.n_wan)
        acc = np.zeros((len(z), self.n_wan, self.n_wan), dtype=complex)
        for ik, (w, h) in enumerate(zip(self.weights, self.hk)):
            a = (z + mu)[:, None, None] * eye - h[None] - sig
            acc += w * _checked_inv(a, f"k-point {ik}")
        return acc

    def local_gf_corr(self, z, mu, sigma_corr) -> np.ndarray:
        g = self.local_gf(z, mu, sigma_corr)
        idx = np.asarray(self.corr_mask)
        return g[:, idx[:, None], idx[None, :]]

    def free_occupancy(self, mu: float, beta: float) -> float:
        """Fermi-function k sum over the correlated orbitals, both spins."""
        from scipy.special import expit

        idx = np.asarray(self.corr_mask)
        n = 0.0
        for w, h in zip(self.weights, self.hk):
            e, v = np.linalg.eigh(h)
            f = expit(-beta * (e - mu))
            n += w * np.sum(np.abs(v[idx, :]) ** 2 * f[None, :])
        return 2 * n


def _checked_inv(a: np.ndarray, where: str) -> np.ndarray:
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular resolvent at {where}") from exc
    if not np.all(np.isfinite(inv)):
        raise np.linalg.LinAlgError(f"singular resolvent at {where}")
    return inv


def read_lattice_file(path, corr_mask=None) -> LatticeHamiltonian:
    """Read the plain-text format: ``nwan nk``, then per k a weight line and nwan**2 ``i j Re Im`` lines."""
    tokens = Path(path).read_text().split("\n")
    lines = [ln.split() for ln in tokens if ln.strip() and not ln.lstrip().startswith("#")]
    nwan, nk = int(lines[0][0]), int(lines[0][1])
    pos = 1
    weights = np.empty(nk)
    hk = np.zeros((nk, nwan, nwan), dtype=complex)
    for ik in range(nk):
        weights[ik] = float(lines[pos][0])
        pos += 1
        for _ in range(nwan * nwan):
            i, j, re, im = lines[pos]
            hk[ik, int(i), int(j)] = float(re) + 1j * float(im)
            pos += 1
    weights = weights / weights.sum()
    if corr_mask is None:
        corr_mask = tuple(range(nwan))
    if not np.any(hk.imag):
        hk = hk.real
    return LatticeHamiltonian(weights, hk, tuple(corr_mask))


def write_lattice_file(lat: LatticeHamiltonian, path) -> None:
    out = [f"{lat.n_wan} {len(lat.weights)}"]
    for w, h in zip(lat.weights, lat.hk):
        out.append(repr(float(w)))
        for i in range(lat.n_wan):
            for j in range(lat.n_wan):
                out.append(f"{i} {j} {float(np.real(h[i, j]))!r} {float(np.imag(h[i, j]))!r}")
    Path(path).write_text("\n".join(out) + "\n")


def semicircle_dos(eps, D: float) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    return np.where(np.abs(eps) < D, 2.0 / (np.pi * D**2) * np.sqrt(np.clip(D**2 - eps**2, 0, None)), 0.0)


def semicircle_hilbert(zeta, D: float):
    """``int rho_sc(e)/(zeta - e) de`` on the physical sheet."""
    zeta = np.asarray(zeta, dtype=complex)
    root = np.sqrt(zeta - D) * np.sqrt(zeta + D)
    return 2.0 * (zeta - root) / D**2


@dataclass(frozen=True)
class BetheLattice:
    """Semicircular band of half-width ``D`` for each of ``n_corr`` degenerate orbitals.

    ``n_dos_points`` sets the Gauss-Chebyshev mesh used by :meth:`as_lattice`
    for energy-resolved output.
    """

    D: float = 2.0
    n_corr: int = 1
    n_dos_points: int = 400

    def __post_init__(self):
        if self.D <= 0:
            raise ValueError("half-bandwidth D must be positive")

    @property
    def corr_mask(self) -> tuple:
        return tuple(range(self.n_corr))

    @property
    def n_wan(self) -> int:
        return self.n_corr

    def h_corr_local(self) -> np.ndarray:
        return np.zeros((self.n_corr, self.n_corr))

    def local_gf(self, z, mu: float, sigma_corr) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        sig = np.asarray(sigma_corr, dtype=complex).reshape(len(z), self.n_corr, self.n_corr)
        zeta = (z + mu)[:, None, None] * np.eye(self.n_corr) - sig
        off = zeta - np.einsum("zii->zi", zeta)[:, :, None] * np.eye(self.n_corr)
        if not np.any(np.abs(off) > 1e-14):
            d = np.einsum("zii->zi", zeta)
            return semicircle_hilbert(d, self.D)[:, :, None] * np.eye(self.n_corr)
        lam, vec = np.linalg.eig(zeta)
        return np.einsum("zij,zj,zjk->zik", vec, semicircle_hilbert(lam, self.D), np.linalg.inv(vec))

    def local_gf_corr(self, z, mu, sigma_corr) -> np.ndarray:
        return self.local_gf(z, mu, sigma_corr)

    def as_lattice(self, n_points: int | None = None) -> LatticeHamiltonian:
        """Gauss quadrature nodes of the semicircle treated as a k mesh."""
        n = n_points or self.n_dos_points
        k = np.arange(1, n + 1)
        theta = k * np.pi / (n + 1)
        eps = self.D * np.cos(theta)
        w = 2.0 / (n + 1) * np.sin(theta) ** 2
        w = w / w.sum()
        hk = eps[:, None, None] * np.eye(self.n_corr)[None]
        return LatticeHamiltonian(w, hk, self.corr_mask)

    def free_occupancy(self, mu: float, beta: float) -> float:
        from scipy.integrate import quad
        from scipy.special import expit

        val, _ = quad(lambda e: semicircle_dos(e, self.D) * expit(-beta * (e - mu)), -self.D, self.D,
                      limit=400, epsabs=1e-13, epsrel=1e-13, points=[mu] if abs(mu) < self.D else None)
        return 2 * self.n_corr * val
