import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_kanamori_aim, two_orbital_one_bath
from oracles import fock_hamiltonian
from qavg.hamiltonian import Kanamori, SecondQuantizedHamiltonian, build_aim, hubbard_atom


@pytest.mark.parametrize("make", [two_orbital_one_bath, random_kanamori_aim,
                                  lambda: random_kanamori_aim(5, complex_hop=True)])
def test_full_matrix_matches_operator_algebra(make):
    ham = make()
    k = ham.kanamori
    ref, _ = fock_hamiltonian(np.asarray(ham.h), ham.n_corr, k.U, k.U0, k.J, k.density_only)
    _, mat = ham.full_matrix()
    assert np.abs(mat - ref).max() < 1e-12


def test_blocks_reproduce_full_spectrum():
    ham = random_kanamori_aim()
    _, full = ham.full_matrix()
    blocks = ham.block_matrices()
    ev = np.sort(np.concatenate([np.linalg.eigvalsh(m) for m in blocks.values()]))
    assert np.allclose(ev, np.linalg.eigvalsh(full), atol=1e-11)
    for m in blocks.values():
        assert np.allclose(m, m.conj().T)


def test_hubbard_atom_levels():
    ham = hubbard_atom(3.0, eps=-0.7)
    _, mat = ham.full_matrix()
    assert np.allclose(np.sort(np.diag(mat)), [-0.7, -0.7, 0.0, 2 * -0.7 + 3.0])
    assert np.allclose(mat, np.diag(np.diag(mat)))


@given(st.floats(1.0, 4.0), st.floats(0.5, 3.0), st.floats(0.05, 0.45))
def test_two_orbital_two_electron_multiplet(U, U0, J):
    """Two electrons in two degenerate orbitals: triplet U0-J, singlets U0+J, U-J, U+J."""
    ham = build_aim(np.zeros((2, 2)), Kanamori(U=U, U0=U0, J=J))
    blocks = ham.block_matrices()
    ev = np.sort(np.concatenate([np.linalg.eigvalsh(blocks[k]) for k in [(2, 0), (1, 1), (0, 2)]]))
    want = np.sort([U0 - J] * 3 + [U0 + J, U - J, U + J])
    assert np.allclose(ev, want, atol=1e-12)


def test_density_only_drops_exchange():
    ham = build_aim(np.zeros((2, 2)), Kanamori(U=2.0, U0=1.2, J=0.4, density_only=True))
    _, mat = ham.full_matrix()
    assert np.allclose(mat, np.diag(np.diag(mat)))


def test_hybridization_placement():
    V = np.array([[0.3, -0.2]])
    ham = build_aim(np.diag([-1.0, -0.5]), Kanamori(), [0.4], V)
    h = np.asarray(ham.h)
    assert h[2, 0] == 0.3 and h[2, 1] == -0.2 and h[0, 2] == 0.3
    assert np.allclose(h[3:, 3:], h[:3, :3]) and np.all(h[:3, 3:] == 0)


def test_validation():
    with pytest.raises(ValueError):
        build_aim([[0.0, 1.0], [0.0, 0.0]], Kanamori())
    with pytest.raises(ValueError):
        Kanamori(U=-1.0)
    h = np.zeros((4, 4))
    h[0, 2] = h[2, 0] = 1.0
    with pytest.raises(ValueError):
        SecondQuantizedHamiltonian(h, 1)
