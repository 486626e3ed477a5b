"""Outcome statistics of the excitation + phase-estimation circuits on a Gibbs state.

Circuits are never simulated gate by gate.  Each channel ``lambda0 -> lambda``
contributes its probability times the phase-estimation kernel evaluated at the
excitation energy, which is exactly what the ancilla register would record.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .greens import ThermalSpectrum, spectral_matrices

DIAG_LABELS = ("e", "h")
OFFDIAG_LABELS = ("e+", "e-", "h+", "h-")
_PHASE = np.exp(1j * np.pi / 4)


@dataclass(frozen=True)
class QpeSetting:
    """Energy grid ``eps_j = e_orig + j / t0`` for ``j = 0 .. 2**n_qval - 1``."""

    t0: float
    e_orig: float
    n_qval: int

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if self.n_qval < 1:
            raise ValueError("n_qval must be at least 1")

    @property
    def n_val(self) -> int:
        return 2 ** self.n_qval

    @property
    def window(self) -> float:
        return self.n_val / self.t0

    def grid(self) -> np.ndarray:
        return self.e_orig + np.arange(self.n_val) / self.t0

    def to_json(self) -> dict:
        return {"t0": self.t0, "E_orig": self.e_orig, "n_qval": self.n_qval}

    @classmethod
    def from_json(cls, d) -> "QpeSetting":
        return cls(float(d["t0"]), float(d["E_orig"]), int(d["n_qval"]))


def shifted_settings(t0: float = 6.0, e_orig: float = -0.5, n_qval: int = 7, n_setting: int = 3) -> list:
    """Settings whose origins are shifted by ``p / (n_setting * t0)``."""
    return [QpeSetting(t0, e_orig + p / (n_setting * t0), n_qval) for p in range(n_setting)]


def qpe_kernel(energy, setting: QpeSetting) -> np.ndarray:
    """Probability of reading ``j`` for excitation energy ``energy``.

    Returns shape ``(N,)`` for scalar input and ``(len(energy), N)`` otherwise.
    """
    e = np.asarray(energy, dtype=float)
    n = setting.n_val
    x = (e[..., None] - setting.e_orig) * setting.t0 - np.arange(n)
    y = x - n * np.round(x / n)
    return (np.sinc(y) / np.sinc(y / n)) ** 2


def qpe_kernel_direct(energy: float, setting: QpeSetting) -> np.ndarray:
    """Explicit geometric sum over ancilla values; slow reference."""
    n = setting.n_val
    jp = np.arange(n)
    out = np.empty(n)
    for j in range(n):
        ph = np.exp(2j * np.pi * jp * ((energy - setting.e_orig) * setting.t0 - j) / n)
        out[j] = abs(ph.sum() / n) ** 2
    return out


@dataclass
class Histogram:
    """Normalized outcome frequencies of one circuit in one setting.

    ``circuit`` is ``(m,)`` or ``(m, m')``.  ``shots == 0`` marks an exact
    distribution.
    """

    setting: QpeSetting
    circuit: tuple
    outcomes: dict
    shots: int = 0
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def is_diagonal(self) -> bool:
        return len(self.circuit) == 1

    @property
    def labels(self) -> tuple:
        return DIAG_LABELS if self.is_diagonal else OFFDIAG_LABELS

    def mass(self, label: str | None = None) -> float:
        if label is None:
            return float(sum(np.sum(v) for v in self.outcomes.values()))
        return float(np.sum(self.outcomes[label]))

    def kind_mass(self, kind: str) -> float:
        return float(sum(np.sum(v) for k, v in self.outcomes.items() if k[0] == kind))

    def file_name(self, p: int) -> str:
        return f"hist_p{p}_m" + "_".join(str(c) for c in self.circuit) + ".json"

    def to_json(self) -> dict:
        out = {
            "setting": self.setting.to_json(),
            "circuit": list(self.circuit),
            "outcomes": {k: [float(x) for x in self.outcomes[k]] for k in self.labels},
            "shots": int(self.shots),
            "seed": self.seed,
        }
        out.update(self.meta)
        return out

    @classmethod
    def from_json(cls, d) -> "Histogram":
        known = {"setting", "circuit", "outcomes", "shots", "seed"}
        return cls(
            QpeSetting.from_json(d["setting"]),
            tuple(int(c) for c in d["circuit"]),
            {k: np.asarray(v, dtype=float) for k, v in d["outcomes"].items()},
            int(d.get("shots", 0)),
            d.get("seed"),
            {k: v for k, v in d.items() if k not in known},
        )

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Histogram":
        return cls.from_json(json.loads(Path(path).read_text()))


def _energy_hist(energy, prob, setting) -> np.ndarray:
    if len(energy) == 0:
        return np.zeros(setting.n_val)
    return prob @ qpe_kernel(energy, setting)


def _offdiag_amplitudes(amp, m, mp, kind):
    if kind == "e":
        return {s: (amp[:, m] + sg * _PHASE * amp[:, mp]) / 2 for s, sg in (("+", 1), ("-", -1))}
    return {s: (amp[:, mp] + sg * np.conj(_PHASE) * amp[:, m]) / 2 for s, sg in (("+", 1), ("-", -1))}


def diag_excitation_distribution(spec: ThermalSpectrum, m: int, setting: QpeSetting) -> Histogram:
    """Exact ``{e, h}`` distributions of the diagonal circuit on orbital ``m``.

    Channels are tagged by ``(lambda0, lambda)`` and summed incoherently; the
    result is normalized by the retained Gibbs weight.
    """
    norm = spec.retained_weight
    out = {}
    for kind in DIAG_LABELS:
        ch = spec.channels(kind)
        out[kind] = _energy_hist(ch.energy, np.abs(ch.amp[:, m]) ** 2, setting) / norm
    return Histogram(setting, (m,), out)


def offdiag_excitation_distribution(spec: ThermalSpectrum, m: int, mp: int, setting: QpeSetting) -> Histogram:
    """Exact ``{e+, e-, h+, h-}`` distributions of the circuit on the ordered pair ``(m, m')``."""
    if m == mp:
        raise ValueError("off-diagonal circuit needs m != m'")
    norm = spec.retained_weight
    out = {}
    for kind in DIAG_LABELS:
        ch = spec.channels(kind)
        for s, a in _offdiag_amplitudes(ch.amp, m, mp, kind).items():
            out[kind + s] = _energy_hist(ch.energy, np.abs(a) ** 2, setting) / norm
    return Histogram(setting, (m, mp), out)


def distribution_from_spectral(grids: dict, circuit: tuple, setting: QpeSetting, norm: float = 1.0) -> Histogram:
    """Same distributions built only from energy-aggregated spectral matrices."""
    out = {}
    for kind in DIAG_LABELS:
        g = grids[kind]
        if len(circuit) == 1:
            (m,) = circuit
            out[kind] = _energy_hist(g.energy, g.S[:, m, m].real, setting) / norm
            continue
        m, mp = circuit
        phase = _PHASE if kind == "e" else np.conj(_PHASE)
        base = (g.S[:, m, m].real + g.S[:, mp, mp].real) / 4
        cross = 0.5 * np.real(phase * g.S[:, m, mp])
        out[kind + "+"] = _energy_hist(g.energy, base + cross, setting) / norm
        out[kind + "-"] = _energy_hist(g.energy, base - cross, setting) / norm
    return Histogram(setting, tuple(circuit), out)


def circuits(n_sorb: int, orbitals=None) -> list:
    """All diagonal circuits followed by all ordered off-diagonal pairs."""
    orbs = list(range(n_sorb)) if orbitals is None else list(orbitals)
    return [(m,) for m in orbs] + [(m, mp) for m in orbs for mp in orbs if m != mp]


def exact_histograms(spec: ThermalSpectrum, settings, orbitals=None) -> dict:
    """``{(p, circuit): Histogram}`` for every setting and circuit."""
    out = {}
    for p, s in enumerate(settings):
        for c in circuits(spec.n_sorb, orbitals):
            if len(c) == 1:
                out[(p, c)] = diag_excitation_distribution(spec, c[0], s)
            else:
                out[(p, c)] = offdiag_excitation_distribution(spec, c[0], c[1], s)
    return out


def aliased_weight(spec: ThermalSpectrum, setting: QpeSetting, tol_amp: float = 0.0) -> float:
    """Total Gibbs-weighted probability of channels lying outside the grid window."""
    tot = 0.0
    for kind in DIAG_LABELS:
        ch = spec.channels(kind)
        x = (ch.energy - setting.e_orig) * setting.t0
        out = (x < -0.5) | (x > setting.n_val - 0.5)
        tot += float(np.sum(np.abs(ch.amp[out]) ** 2))
    return tot / spec.retained_weight / spec.n_sorb


def recover_offdiag(h_mmp: Histogram, h_mpm: Histogram, kind: str) -> np.ndarray:
    """Bin-wise ``sum_eps S_mm'(eps) P_j(eps)`` from the two ordered-pair circuits.

    The hole circuit applies the conjugate phase, so the same combination
    returns the complex conjugate there; it is undone here.
    """
    d1 = h_mmp.outcomes[kind + "+"] - h_mmp.outcomes[kind + "-"]
    d2 = h_mpm.outcomes[kind + "+"] - h_mpm.outcomes[kind + "-"]
    rec = np.conj(_PHASE) * d1 + _PHASE * d2
    return rec if kind == "e" else np.conj(rec)


def sample_histogram(exact: Histogram, shots: int, rng) -> Histogram:
    """Multinomial draw of ``shots`` outcomes over all ``(label, j)`` cells."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    rng = np.random.default_rng(rng)
    labels = exact.labels
    p = np.concatenate([exact.outcomes[k] for k in labels])
    p = np.clip(p, 0, None)
    p = p / p.sum()
    counts = rng.multinomial(shots, p)
    n = exact.setting.n_val
    out = {k: counts[i * n:(i + 1) * n] / shots for i, k in enumerate(labels)}
    return Histogram(exact.setting, exact.circuit, out, shots)


def sample_all(exact: dict, shots: int, seed: int) -> dict:
    """Sample every histogram with its own child generator, keyed deterministically."""
    keys = sorted(exact)
    children = np.random.SeedSequence(seed).spawn(len(keys))
    out = {}
    for k, ss in zip(keys, children):
        h = sample_histogram(exact[k], shots, np.random.default_rng(ss))
        h.seed = seed
        out[k] = h
    return out


@dataclass(frozen=True)
class MeasuredGamma:
    """One-electron matrix assembled from circuit outcome frequencies."""

    gamma: np.ndarray
    m_d: int
    m_od: int


def _offdiag_estimate(h: Histogram) -> complex:
    """Single-circuit estimate of ``gamma_mm'`` from its four outcome masses."""
    r2 = math.sqrt(2.0)
    ph, pe_m, pe_p = h.mass("h+"), h.mass("e-"), h.mass("e+")
    return complex(-1 / r2 + r2 * (ph + pe_m), 1 / r2 - r2 * (ph + pe_p))


def estimate_gamma(hists: dict, n_sorb: int, orbitals=None, real: bool = False) -> MeasuredGamma:
    """Assemble ``gamma_meas`` from ``{circuit: Histogram}`` (one setting or merged).

    Diagonal elements are the hole masses.  Each off-diagonal element averages
    the estimate from ``C_mm'`` with the conjugate of that from ``C_m'm``,
    weighted by their shot counts when both are finite.
    """
    orbs = list(range(n_sorb)) if orbitals is None else list(orbitals)
    missing = [c for c in circuits(n_sorb, orbs) if c not in hists]
    if missing:
        names = ", ".join("C" + "_".join(map(str, c)) for c in missing)
        raise KeyError(f"missing circuit data: {names}")
    n = len(orbs)
    g = np.zeros((n, n), dtype=complex)
    for i, m in enumerate(orbs):
        g[i, i] = hists[(m,)].kind_mass("h")
    for i, m in enumerate(orbs):
        for k, mp in enumerate(orbs):
            if k <= i:
                continue
            a, b = hists[(m, mp)], hists[(mp, m)]
            wa, wb = (a.shots, b.shots) if a.shots and b.shots else (1, 1)
            est = (wa * _offdiag_estimate(a) + wb * np.conj(_offdiag_estimate(b))) / (wa + wb)
            g[i, k], g[k, i] = est, np.conj(est)
    if real:
        g = g.real
    m_d = max((hists[(m,)].shots for m in orbs), default=0)
    m_od = max((hists[c].shots for c in hists if len(c) == 2), default=0)
    return MeasuredGamma(g, m_d, m_od)


def estimate_gamma_diag(count_h: np.ndarray, shots: int) -> np.ndarray:
    """Diagonal estimator ``M_h / M_d`` from raw hole counts."""
    return np.asarray(count_h, dtype=float) / shots


def shot_budget(n_sorb: int, eps: float, p_fail: float) -> tuple[int, int, int]:
    """``(M_d, M_od, M_tot)`` from the Chebyshev bounds on the gamma estimators.

    ``M_d = ceil(1/(4 eps^2 p))`` for a diagonal element and
    ``M_od = ceil(1/(2 eps^2 p))`` for the real or imaginary part of an
    off-diagonal element.
    """
    if not (0 < eps < 1 and 0 < p_fail < 1):
        raise ValueError("eps and p_fail must lie in (0, 1)")
    m_d = math.ceil(1 / (4 * eps**2 * p_fail) - 1e-9)
    m_od = math.ceil(1 / (2 * eps**2 * p_fail) - 1e-9)
    return m_d, m_od, n_sorb * m_d + (n_sorb**2 - n_sorb) * m_od


def spectral_binned(spec: ThermalSpectrum, circuit: tuple, setting: QpeSetting, kind: str) -> np.ndarray:
    """``sum_eps S_mm'(eps) P_j(eps)`` from exact spectral matrices (reference for recovery)."""
    g = spectral_matrices(spec)[kind]
    m, mp = circuit
    if len(g.energy) == 0:
        return np.zeros(setting.n_val, dtype=complex)
    return (g.S[:, m, mp] @ qpe_kernel(g.energy, setting)) / spec.retained_weight
