"""Anderson impurity model Hamiltonians with Kanamori interaction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fock import FockBasis, apply_ops


@dataclass(frozen=True)
class Kanamori:
    """Kanamori parameters in eV: intra-orbital ``U``, inter-orbital ``U0``, Hund ``J``."""

    U: float = 0.0
    U0: float = 0.0
    J: float = 0.0
    density_only: bool = False

    def __post_init__(self):
        if self.U < 0:
            raise ValueError(f"negative U={self.U}")

    def terms(self, n_corr: int, n_orb: int):
        """Operator strings ``(coef, ops)`` on spin-major indices."""
        up = list(range(n_corr))
        dn = [n_orb + i for i in range(n_corr)]
        out = []

        def nn(a, b):
            return [(a, True), (a, False), (b, True), (b, False)]

        for i in range(n_corr):
            if self.U:
                out.append((self.U, nn(up[i], dn[i])))
        for i in range(n_corr):
            for j in range(n_corr):
                if i == j:
                    continue
                if self.U0:
                    out.append((self.U0, nn(up[i], dn[j])))
                if i < j and self.U0 - self.J:
                    out.append((self.U0 - self.J, nn(up[i], up[j])))
                    out.append((self.U0 - self.J, nn(dn[i], dn[j])))
                if not self.density_only and self.J:
                    # spin flip and pair hopping
                    out.append((-self.J, [(up[i], True), (dn[i], False), (dn[j], True), (up[j], False)]))
                    out.append((self.J, [(up[i], True), (dn[i], True), (dn[j], False), (up[j], False)]))
        return out


@dataclass(frozen=True)
class SecondQuantizedHamiltonian:
    """One-body matrix ``h`` (chemical potential absorbed) plus Kanamori terms.

    ``h`` is the full ``n_sorb x n_sorb`` spin-major matrix; the interaction acts
    on the first ``n_corr`` orbitals of each spin.
    """

    h: np.ndarray
    n_corr: int
    kanamori: Kanamori = Kanamori()
    bath_energies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bath_hybridization: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        h = np.asarray(self.h)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] % 2:
            raise ValueError(f"h must be square with even size, got {h.shape}")
        if not np.allclose(h, h.conj().T, atol=1e-12, rtol=0):
            raise ValueError("one-body matrix is not Hermitian")
        n_orb = h.shape[0] // 2
        if np.any(np.abs(h[:n_orb, n_orb:]) > 1e-14):
            raise ValueError("one-body matrix couples opposite spins")
        if self.n_corr > n_orb:
            raise ValueError("n_corr exceeds orbitals per spin")

    @property
    def n_sorb(self) -> int:
        return self.h.shape[0]

    @property
    def n_orb(self) -> int:
        return self.n_sorb // 2

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.h) or not np.any(np.abs(np.imag(self.h)) > 0)

    def terms(self):
        h = np.asarray(self.h)
        if self.is_real:
            h = h.real
        out = []
        for m in range(self.n_sorb):
            for mp in range(self.n_sorb):
                if h[m, mp] != 0:
                    out.append((h[m, mp], [(m, True), (mp, False)]))
        out.extend(self.kanamori.terms(self.n_corr, self.n_orb))
        return out

    def basis(self) -> FockBasis:
        return FockBasis.build(self.n_sorb)

    def block_matrices(self, basis: FockBasis | None = None) -> dict:
        """Dense Hamiltonian matrix per ``(n_up, n_dn)`` block."""
        basis = basis or self.basis()
        terms = self.terms()
        dtype = float if self.is_real else complex
        out = {}
        for key, states in basis.blocks.items():
            mat = np.zeros((len(states), len(states)), dtype=dtype)
            for coef, ops in terms:
                new, sign, alive = apply_ops(states, ops)
                cols = np.nonzero(alive)[0]
                if not len(cols):
                    continue
                rows = np.searchsorted(states, new[cols])
                if np.any(rows >= len(states)) or np.any(states[np.minimum(rows, len(states) - 1)] != new[cols]):
                    raise ValueError("operator term leaves its (N, S_z) block")
                np.add.at(mat, (rows, cols), coef * sign[cols])
            out[key] = mat
        return out

    def full_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Hamiltonian on the full Fock space, basis ordered by integer value."""
        states = np.arange(2 ** self.n_sorb, dtype=np.int64)
        dtype = float if self.is_real else complex
        mat = np.zeros((len(states), len(states)), dtype=dtype)
        for coef, ops in self.terms():
            new, sign, alive = apply_ops(states, ops)
            cols = np.nonzero(alive)[0]
            np.add.at(mat, (new[cols], cols), coef * sign[cols])
        return states, mat


def _spin_double(h_orb: np.ndarray) -> np.ndarray:
    n = h_orb.shape[0]
    h = np.zeros((2 * n, 2 * n), dtype=h_orb.dtype)
    h[:n, :n] = h_orb
    h[n:, n:] = h_orb
    return h


def build_aim(h_corr, kanamori: Kanamori, bath_energies=(), bath_hybridization=None) -> SecondQuantizedHamiltonian:
    """Assemble the impurity Hamiltonian.

    Parameters
    ----------
    h_corr : (n_corr, n_corr) array
        Spin-independent one-body block of the correlated orbitals, chemical
        potential already subtracted.
    kanamori : Kanamori
    bath_energies : (n_bath,) array
    bath_hybridization : (n_bath, n_corr) array
        Amplitude ``V[b, i]`` of the hopping between bath ``b`` and orbital ``i``.
    """
    h_corr = np.atleast_2d(np.asarray(h_corr))
    n_corr = h_corr.shape[0]
    if h_corr.shape != (n_corr, n_corr):
        raise ValueError("h_corr must be square")
    if not np.allclose(h_corr, h_corr.conj().T, atol=1e-12, rtol=0):
        raise ValueError("h_corr is not Hermitian")
    eb = np.atleast_1d(np.asarray(bath_energies, dtype=float))
    n_bath = len(eb)
    V = np.zeros((n_bath, n_corr)) if bath_hybridization is None else np.asarray(bath_hybridization)
    V = V.reshape(n_bath, n_corr)
    dtype = np.result_type(h_corr, V, float)
    n_orb = n_corr + n_bath
    h_orb = np.zeros((n_orb, n_orb), dtype=dtype)
    h_orb[:n_corr, :n_corr] = h_corr
    h_orb[n_corr:, n_corr:] = np.diag(eb)
    h_orb[n_corr:, :n_corr] = V
    h_orb[:n_corr, n_corr:] = V.conj().T
    return SecondQuantizedHamiltonian(
        h=_spin_double(h_orb), n_corr=n_corr, kanamori=kanamori,
        bath_energies=eb, bath_hybridization=V,
    )


def hubbard_atom(U: float, eps: float | None = None) -> SecondQuantizedHamiltonian:
    """Single orbital, no bath; ``eps`` defaults to the half-filling value ``-U/2``."""
    eps = -U / 2 if eps is None else eps
    return build_aim([[eps]], Kanamori(U=U))
