"""Exact diagonalization per (N, S_z) block and thermal bookkeeping."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fock import FockBasis
from .hamiltonian import SecondQuantizedHamiltonian

DEGENERACY_TOL = 1e-8


@dataclass
class EigenSolution:
    """Eigenpairs per block with energies measured from the global ground state.

    ``z`` is the partition function on that shifted scale, so Gibbs weights are
    ``exp(-beta * energies) / z``; ``e_ground`` restores absolute energies.
    """

    hamiltonian: SecondQuantizedHamiltonian
    basis: FockBasis
    beta: float
    e_ground: float
    energies: dict
    vectors: dict
    z: float
    _cmat: dict = field(default_factory=dict, repr=False)

    @property
    def keys(self) -> list:
        return list(self.energies)

    def weights(self, key) -> np.ndarray:
        return np.exp(-self.beta * self.energies[key]) / self.z

    def all_energies(self) -> np.ndarray:
        return np.concatenate([self.energies[k] for k in self.keys])

    def absolute_energies(self, key) -> np.ndarray:
        return self.energies[key] + self.e_ground

    def ground_states(self, tol: float = DEGENERACY_TOL) -> list:
        return [(k, i) for k in self.keys for i in np.nonzero(self.energies[k] < tol)[0]]

    def creation_matrix(self, key, m: int):
        """``(target_key, C)`` with ``C`` the Fock-basis matrix of ``a_m^dagger`` out of block ``key``."""
        ck = (key, m)
        if ck not in self._cmat:
            self._cmat[ck] = self.basis.creation_matrix(key, m)
        return self._cmat[ck]

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "e_ground": self.e_ground,
            "partition_function": self.z,
            "sectors": [
                {
                    "n_up": int(k[0]), "n_dn": int(k[1]),
                    "eigenvalues": [float(e) + self.e_ground for e in self.energies[k]],
                    "gibbs_weights": [float(w) for w in self.weights(k)],
                }
                for k in self.keys
            ],
        }

    def dump(self, path, **extra) -> None:
        data = dict(extra)
        data.update(self.to_json())
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1)


def diagonalize(ham: SecondQuantizedHamiltonian, beta: float) -> EigenSolution:
    """Dense diagonalization of every ``(n_up, n_dn)`` block."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if ham.n_sorb > 16:
        raise ValueError(f"dense diagonalization limited to n_sorb <= 16, got {ham.n_sorb}")
    basis = ham.basis()
    mats = ham.block_matrices(basis)
    energies, vectors = {}, {}
    for key, mat in mats.items():
        try:
            e, v = np.linalg.eigh(mat)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"diagonalization failed in block {key}") from exc
        energies[key], vectors[key] = e, v
    e0 = min(e[0] for e in energies.values())
    for key in energies:
        energies[key] = energies[key] - e0
    z = float(sum(np.exp(-beta * e).sum() for e in energies.values()))
    return EigenSolution(ham, basis, float(beta), float(e0), energies, vectors, z)


@dataclass(frozen=True)
class ThermalInitialSet:
    """Initial states kept for the thermal sums: ``(key, index, boltzmann_factor)``."""

    entries: tuple
    eps_b: float

    def __len__(self):
        return len(self.entries)

    def retained_weight(self, sol: EigenSolution) -> float:
        return float(sum(f for _, _, f in self.entries) / sol.z)

    def keys(self) -> set:
        return {k for k, _, _ in self.entries}


def select_initial_states(sol: EigenSolution, eps_b: float) -> ThermalInitialSet:
    """Keep states with ``exp(-beta (E - E_ground)) > eps_b``."""
    if not 0 <= eps_b < 1:
        raise ValueError(f"eps_b must lie in [0, 1), got {eps_b}")
    entries = []
    for key in sol.keys:
        fac = np.exp(-sol.beta * sol.energies[key])
        for i in np.nonzero(fac > eps_b)[0]:
            entries.append((key, int(i), float(fac[i])))
    if not entries:
        raise ValueError("no initial state survives the Boltzmann threshold")
    return ThermalInitialSet(tuple(entries), float(eps_b))


def excitation_energies(sol: EigenSolution, init: ThermalInitialSet) -> tuple[np.ndarray, np.ndarray]:
    """All ``E_lambda - E_lambda0`` for electron and hole channels out of the kept states."""
    n_orb = sol.basis.n_orb
    elec, hole = [], []
    for key, i, _ in init.entries:
        e0 = sol.energies[key][i]
        nu, nd = key
        for t in ((nu + 1, nd), (nu, nd + 1)):
            if t[0] <= n_orb and t[1] <= n_orb:
                elec.append(sol.energies[t] - e0)
        for t in ((nu - 1, nd), (nu, nd - 1)):
            if t[0] >= 0 and t[1] >= 0:
                hole.append(sol.energies[t] - e0)
    cat = lambda x: np.concatenate(x) if x else np.zeros(0)
    return cat(elec), cat(hole)


def count_excitation_channels(sol: EigenSolution, init: ThermalInitialSet, energy_grid):
    """Accumulated channel counts ``N_e(E)`` and ``N_h(E)``.

    ``N_e(E)`` counts electron channels with excitation energy ``<= E``;
    ``N_h(E)`` counts hole channels with excitation energy ``<= -E``, so it
    is nonincreasing in ``E``.
    """
    grid = np.asarray(energy_grid, dtype=float)
    ee, eh = excitation_energies(sol, init)
    ee, eh = np.sort(ee), np.sort(eh)
    n_e = np.searchsorted(ee, grid, side="right")
    n_h = np.searchsorted(eh, -grid, side="right")
    return n_e, n_h
