"""Finite-temperature one-particle Green's functions in the Lehmann representation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import EigenSolution, ThermalInitialSet, diagonalize, select_initial_states
from .hamiltonian import SecondQuantizedHamiltonian

MERGE_TOL = 1e-9
POLE_TOL = 1e-12


@dataclass(frozen=True)
class Channels:
    """Excitation channels of one kind.

    ``amp[c, m]`` is ``sqrt(w_lambda0) <lambda|a_m^dagger|lambda0>`` for electron
    channels and ``sqrt(w_lambda0) <lambda|a_m|lambda0>`` for hole channels;
    ``energy[c] = E_lambda - E_lambda0``.  ``initial``/``final`` tag each
    channel with ``(block_id, index)`` pairs.
    """

    energy: np.ndarray
    amp: np.ndarray
    initial: np.ndarray
    final: np.ndarray

    def __len__(self):
        return len(self.energy)

    def transition_matrices(self, kind: str) -> np.ndarray:
        """``B`` matrices, shape ``(n_c, n_sorb, n_sorb)``."""
        b = self.amp
        if kind == "e":
            return np.conj(b)[:, :, None] * b[:, None, :]
        return b[:, :, None] * np.conj(b)[:, None, :]

    def restrict(self, orbitals) -> "Channels":
        idx = np.asarray(orbitals)
        return Channels(self.energy, self.amp[:, idx], self.initial, self.final)


@dataclass
class ThermalSpectrum:
    """Eigen solution, retained initial states and the electron/hole channels."""

    solution: EigenSolution
    initial: ThermalInitialSet
    electron: Channels
    hole: Channels

    @property
    def beta(self) -> float:
        return self.solution.beta

    @property
    def n_sorb(self) -> int:
        return self.solution.hamiltonian.n_sorb

    @property
    def retained_weight(self) -> float:
        return self.initial.retained_weight(self.solution)

    @property
    def is_real(self) -> bool:
        return self.solution.hamiltonian.is_real

    def channels(self, kind: str) -> Channels:
        return self.electron if kind == "e" else self.hole

    def gamma(self) -> np.ndarray:
        """One-electron matrix ``gamma[m, m'] = <a_m^dagger a_m'>`` from hole channels."""
        b = self.hole.amp
        g = np.conj(b).T @ b
        return g.real if self.is_real else g


def build_channels(sol: EigenSolution, init: ThermalInitialSet) -> tuple[Channels, Channels]:
    n_sorb = sol.basis.n_sorb
    n_orb = n_sorb // 2
    block_id = {k: i for i, k in enumerate(sol.keys)}
    dtype = float if sol.hamiltonian.is_real else complex
    parts = {"e": [], "h": []}
    by_key = {}
    for key, i, fac in init.entries:
        by_key.setdefault(key, []).append((i, fac))
    for key, items in by_key.items():
        idx = np.array([i for i, _ in items])
        sw = np.sqrt(np.array([f for _, f in items]) / sol.z)
        v0 = sol.vectors[key][:, idx] * sw[None, :]
        e0 = sol.energies[key][idx]
        for spin in (0, 1):
            orbs = range(spin * n_orb, (spin + 1) * n_orb)
            # electron: a_m^dagger from `key`
            tkey = (key[0] + (spin == 0), key[1] + (spin == 1))
            if tkey in sol.energies:
                vt = sol.vectors[tkey]
                amp = np.zeros((len(idx), vt.shape[1], n_sorb), dtype=dtype)
                for m in orbs:
                    _, c = sol.creation_matrix(key, m)
                    amp[:, :, m] = (vt.conj().T @ (c @ v0)).T
                _append(parts["e"], sol.energies[tkey], e0, amp, block_id[key], idx, block_id[tkey])
            # hole: a_m = (a_m^dagger)^T out of the lower block
            skey = (key[0] - (spin == 0), key[1] - (spin == 1))
            if skey in sol.energies:
                vs = sol.vectors[skey]
                amp = np.zeros((len(idx), vs.shape[1], n_sorb), dtype=dtype)
                for m in orbs:
                    _, c = sol.creation_matrix(skey, m)
                    amp[:, :, m] = (vs.conj().T @ (c.T @ v0)).T
                _append(parts["h"], sol.energies[skey], e0, amp, block_id[key], idx, block_id[skey])
    return _stack(parts["e"], n_sorb, dtype), _stack(parts["h"], n_sorb, dtype)


def _append(bucket, e_final, e0, amp, bid0, idx0, bid1):
    n0, n1 = amp.shape[:2]
    bucket.append((
        (e_final[None, :] - e0[:, None]).ravel(),
        amp.reshape(n0 * n1, -1),
        np.stack([np.full(n0 * n1, bid0), np.repeat(idx0, n1)], axis=1),
        np.stack([np.full(n0 * n1, bid1), np.tile(np.arange(n1), n0)], axis=1),
    ))


def _stack(bucket, n_sorb, dtype) -> Channels:
    if not bucket:
        z = np.zeros((0, 2), dtype=int)
        return Channels(np.zeros(0), np.zeros((0, n_sorb), dtype=dtype), z, z)
    return Channels(*(np.concatenate([b[i] for b in bucket]) for i in range(4)))


def thermal_spectrum(ham: SecondQuantizedHamiltonian, beta: float, eps_b: float = 1e-4) -> ThermalSpectrum:
    """Diagonalize, apply the Boltzmann threshold and collect all channels."""
    sol = diagonalize(ham, beta)
    init = select_initial_states(sol, eps_b)
    e, h = build_channels(sol, init)
    return ThermalSpectrum(sol, init, e, h)


def _check_poles(z: np.ndarray, poles: np.ndarray) -> None:
    if len(poles) == 0 or len(z) == 0:
        return
    d = np.min(np.abs(z[:, None] - poles[None, :]))
    if d < POLE_TOL:
        raise ZeroDivisionError(f"frequency within {d:.1e} of a pole")


def _pole_sum(z, energy, left, right, sign, chunk=256):
    """``sum_c left[c, m] right[c, m'] / (z - sign*energy[c])`` over a z list."""
    n = left.shape[1]
    out = np.zeros((len(z), n, n), dtype=complex)
    pair = left[:, :, None] * right[:, None, :]
    pair = pair.reshape(len(energy), n * n)
    for s in range(0, len(z), chunk):
        zz = z[s:s + chunk]
        out[s:s + chunk] = (1.0 / (zz[:, None] - sign * energy[None, :]) @ pair).reshape(len(zz), n, n)
    return out


def lehmann_gf(spec: ThermalSpectrum, z, parts: bool = False, orbitals=None):
    """``G(z)`` as ``(n_z, n, n)``; with ``parts=True`` returns ``(G_e, G_h)``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    ce, ch = spec.electron, spec.hole
    if orbitals is not None:
        ce, ch = ce.restrict(orbitals), ch.restrict(orbitals)
    ce, ch = _drop_silent(ce), _drop_silent(ch)
    _check_poles(z, ce.energy)
    _check_poles(z, -ch.energy)
    ge = _pole_sum(z, ce.energy, np.conj(ce.amp), ce.amp, +1)
    gh = _pole_sum(z, ch.energy, ch.amp, np.conj(ch.amp), -1)
    return (ge, gh) if parts else ge + gh


def _drop_silent(ch: Channels) -> Channels:
    keep = np.any(np.abs(ch.amp) > 1e-15, axis=1)
    return Channels(ch.energy[keep], ch.amp[keep], ch.initial[keep], ch.final[keep])


def matsubara_frequencies(beta: float, n_matsu: int, negative: bool = True):
    n = np.arange(-n_matsu if negative else 0, n_matsu + 1)
    return n, (2 * n + 1) * np.pi / beta


def matsubara_gf(spec: ThermalSpectrum, n_matsu: int = 2047, orbitals=None, negative: bool = True):
    """``(n, G(i w_n))`` for ``n = -n_matsu .. n_matsu`` (or ``0 .. n_matsu``)."""
    if n_matsu < 0:
        raise ValueError("n_matsu must be nonnegative")
    n, w = matsubara_frequencies(spec.beta, n_matsu, negative)
    return n, lehmann_gf(spec, 1j * w, orbitals=orbitals)


def dos(spec: ThermalSpectrum, omega, delta: float = 0.02) -> np.ndarray:
    if delta <= 0:
        raise ValueError("broadening must be positive")
    g = lehmann_gf(spec, np.asarray(omega) + 1j * delta)
    return -np.einsum("zii->z", g).imag / np.pi


@dataclass(frozen=True)
class SpectralGrid:
    """Distinct excitation energies with aggregated spectral matrices ``S(eps)``."""

    energy: np.ndarray
    S: np.ndarray

    def total(self) -> np.ndarray:
        return self.S.sum(axis=0)


def aggregate(energy: np.ndarray, mats: np.ndarray, tol: float = MERGE_TOL) -> SpectralGrid:
    if len(energy) == 0:
        return SpectralGrid(np.zeros(0), np.zeros((0,) + mats.shape[1:], dtype=mats.dtype))
    order = np.argsort(energy, kind="stable")
    e = energy[order]
    new = np.concatenate([[True], np.diff(e) > tol])
    label = np.cumsum(new) - 1
    n = label[-1] + 1
    S = np.zeros((n,) + mats.shape[1:], dtype=mats.dtype)
    np.add.at(S, label, mats[order])
    cnt = np.bincount(label)
    centers = np.bincount(label, weights=e) / cnt
    return SpectralGrid(centers, S)


def spectral_matrices(spec: ThermalSpectrum, tol: float = MERGE_TOL) -> dict:
    """``{'e': SpectralGrid, 'h': SpectralGrid}`` with energies merged within ``tol``."""
    out = {}
    for kind in ("e", "h"):
        ch = _drop_silent(spec.channels(kind))
        B = ch.transition_matrices(kind)
        if spec.is_real:
            B = B.real
        out[kind] = aggregate(ch.energy, B, tol)
    return out


def gf_from_spectral(grids: dict, z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    ge, gh = grids["e"], grids["h"]
    out = np.einsum("ze,emn->zmn", 1.0 / (z[:, None] - ge.energy[None, :]), ge.S)
    out = out + np.einsum("ze,emn->zmn", 1.0 / (z[:, None] + gh.energy[None, :]), gh.S)
    return out


@dataclass(frozen=True)
class OneElectronMatrix:
    """``gamma`` with natural occupancies (descending) and ``U_nat`` (rows are ``c^(nu) T``)."""

    gamma: np.ndarray
    occupancies: np.ndarray
    u_nat: np.ndarray


def natural_orbitals(gamma) -> OneElectronMatrix:
    gamma = np.asarray(gamma)
    if not np.allclose(gamma, np.conj(gamma.T), atol=1e-10):
        raise ValueError("gamma is not Hermitian")
    n, c = np.linalg.eigh(gamma)
    order = np.argsort(-n, kind="stable")
    n, c = n[order], c[:, order]
    return OneElectronMatrix(gamma, n, c.T.copy())


def no_transform_gf(g_wbo: np.ndarray, u_nat: np.ndarray) -> np.ndarray:
    """``U_nat G U_nat^dagger`` applied to each frequency slice."""
    return u_nat @ g_wbo @ np.conj(u_nat.T)


def no_transition_vectors(spec: ThermalSpectrum, no: OneElectronMatrix, kind: str,
                          orbitals=None, tol: float = 1e-12) -> np.ndarray:
    """Renormalized NO transition amplitudes, ``(n_channels, n_nu)``.

    Columns are orthonormal whenever no occupancy sits within ``tol`` of 0 or 1.
    """
    ch = spec.channels(kind)
    amp = ch.amp if orbitals is None else ch.amp[:, np.asarray(orbitals)]
    n = no.occupancies
    if kind == "e":
        scale = 1.0 - n
        proj = amp @ np.conj(no.u_nat.T)
    else:
        scale = n
        proj = amp @ no.u_nat.T
    if np.any(scale < tol):
        raise ZeroDivisionError("natural occupancy at 0 or 1 makes the renormalization singular")
    return proj / np.sqrt(scale)[None, :]
