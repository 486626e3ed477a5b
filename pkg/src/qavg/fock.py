"""Occupation-number basis and second-quantized operators.

Spin orbitals are ordered spin-major: indices ``0 .. n_orb-1`` are spin up,
``n_orb .. 2*n_orb-1`` spin down.  Bit ``m`` of a basis integer is the
occupation of spin orbital ``m`` and the fermionic sign of ``a_m^dagger``
counts occupied orbitals with index below ``m``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

ANNIHILATED = None


def popcount(x):
    return np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)


def _check_index(m: int, n_sorb: int) -> None:
    if not 0 <= m < n_sorb:
        raise IndexError(f"spin-orbital index {m} out of range for n_sorb={n_sorb}")


def apply_creation(state: int, m: int, n_sorb: int):
    """Apply ``a_m^dagger`` to a basis state.

    Returns ``(new_state, sign)`` or ``None`` when orbital ``m`` is occupied.
    """
    _check_index(m, n_sorb)
    if (state >> m) & 1:
        return ANNIHILATED
    sign = -1 if bin(state & ((1 << m) - 1)).count("1") % 2 else 1
    return state | (1 << m), sign


def apply_annihilation(state: int, m: int, n_sorb: int):
    """Apply ``a_m`` to a basis state; ``None`` when orbital ``m`` is empty."""
    _check_index(m, n_sorb)
    if not (state >> m) & 1:
        return ANNIHILATED
    sign = -1 if bin(state & ((1 << m) - 1)).count("1") % 2 else 1
    return state & ~(1 << m), sign


def apply_ops(states: np.ndarray, ops) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized action of an operator string on many basis states.

    ``ops`` is a sequence of ``(m, dagger)`` read left to right as written in
    the product, so the last entry acts first.  Returns ``(new_states, sign,
    alive)``.
    """
    s = np.array(states, dtype=np.int64, copy=True)
    sign = np.ones(s.shape, dtype=np.int64)
    alive = np.ones(s.shape, dtype=bool)
    for m, dagger in reversed(list(ops)):
        bit = np.int64(1) << m
        occ = (s & bit) != 0
        alive &= ~occ if dagger else occ
        parity = popcount(s & (bit - 1)) & 1
        sign = np.where(parity == 1, -sign, sign)
        s = s | bit if dagger else s & ~bit
    return s, sign, alive


@dataclass(frozen=True)
class FockBasis:
    """All ``2**n_sorb`` occupation states grouped by ``(n_up, n_dn)``.

    ``blocks[(n_up, n_dn)]`` holds the sorted basis integers of that block;
    ``sectors[N]`` the sorted union over ``n_up + n_dn = N``.
    """

    n_sorb: int
    blocks: dict = field(repr=False)

    @classmethod
    def build(cls, n_sorb: int) -> "FockBasis":
        if n_sorb % 2:
            raise ValueError("n_sorb must be even (two spin species)")
        n_orb = n_sorb // 2
        half = []
        for k in range(n_orb + 1):
            half.append(sorted(sum(1 << i for i in c) for c in combinations(range(n_orb), k)))
        blocks = {}
        for nu in range(n_orb + 1):
            up = np.array(half[nu], dtype=np.int64)
            for nd in range(n_orb + 1):
                dn = np.array(half[nd], dtype=np.int64) << n_orb
                states = (dn[:, None] | up[None, :]).ravel()
                blocks[(nu, nd)] = np.sort(states)
        return cls(n_sorb, blocks)

    @property
    def n_orb(self) -> int:
        return self.n_sorb // 2

    @property
    def sectors(self) -> dict:
        out = {}
        for (nu, nd), states in self.blocks.items():
            out.setdefault(nu + nd, []).append(states)
        return {n: np.sort(np.concatenate(v)) for n, v in sorted(out.items())}

    def dim(self, key) -> int:
        return len(self.blocks[key])

    def sector_dims(self) -> dict:
        return {n: comb(self.n_sorb, n) for n in range(self.n_sorb + 1)}

    def spin_of(self, m: int) -> int:
        return 0 if m < self.n_orb else 1

    def shifted_key(self, key, m: int, dagger: bool):
        """Block reached from ``key`` by ``a_m^dagger`` (or ``a_m``)."""
        d = 1 if dagger else -1
        nu, nd = key
        if self.spin_of(m) == 0:
            nu += d
        else:
            nd += d
        if 0 <= nu <= self.n_orb and 0 <= nd <= self.n_orb:
            return (nu, nd)
        return None

    def operator_matrix(self, key, ops) -> tuple[tuple, np.ndarray]:
        """Dense matrix of an operator string from block ``key``.

        Returns ``(target_key, M)`` with ``M[i, j] = <target_i|op|key_j>``.
        The operator string must map the block onto a single block.
        """
        src = self.blocks[key]
        dnu = sum((1 if d else -1) for m, d in ops if self.spin_of(m) == 0)
        dnd = sum((1 if d else -1) for m, d in ops if self.spin_of(m) == 1)
        tkey = (key[0] + dnu, key[1] + dnd)
        if tkey not in self.blocks:
            return tkey, np.zeros((0, len(src)))
        tgt = self.blocks[tkey]
        new, sign, alive = apply_ops(src, ops)
        mat = np.zeros((len(tgt), len(src)))
        cols = np.nonzero(alive)[0]
        rows = np.searchsorted(tgt, new[cols])
        np.add.at(mat, (rows, cols), sign[cols])
        return tkey, mat

    def creation_matrix(self, key, m: int):
        return self.operator_matrix(key, [(m, True)])
