"""Green's function reconstruction from phase-estimation histograms.

The model places ``n_ch`` fictitious channels per excitation kind, gathered in
groups that share an energy and a parabola width.  Channel amplitudes in the
natural-orbital frame are the rows of a Householder-generated matrix ``Q``
(``n_ch x n_eff`` with orthonormal columns).  Electron and hole parameters are
fitted independently by multi-start Metropolis sampling of the weighted L1
cost.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fictitious import channel_kernel, gquad
from .greens import OneElectronMatrix, ThermalSpectrum, aggregate, natural_orbitals
from .householder import angles_from_vectors, householder_vectors, n_angles
from .qpe import DIAG_LABELS, Histogram, QpeSetting, circuits

KINDS = DIAG_LABELS
_PHASE = {"e": np.exp(1j * np.pi / 4), "h": np.exp(-1j * np.pi / 4)}


@dataclass
class KindParameters:
    """Trial parameters of one excitation kind.

    ``energies`` and ``widths`` have one entry per group; group ``g`` owns
    ``multiplicities[g]`` consecutive rows of ``Q``.  A width of exactly 0 is a
    simple pole.
    """

    energies: np.ndarray
    widths: np.ndarray
    angles: np.ndarray
    multiplicities: tuple
    n_vec: int

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.widths = np.asarray(self.widths, dtype=float)
        self.angles = np.asarray(self.angles, dtype=float)
        self.multiplicities = tuple(int(d) for d in self.multiplicities)
        if len(self.energies) != len(self.multiplicities) or len(self.widths) != len(self.energies):
            raise ValueError("one energy, width and multiplicity per group")
        if min(self.multiplicities, default=0) < 1:
            raise ValueError("multiplicities must be >= 1")
        if self.n_ch < self.n_vec:
            raise ValueError(f"need n_ch >= {self.n_vec}, got {self.n_ch}")
        if np.any(self.widths < 0):
            raise ValueError("negative width")
        if len(self.angles) != n_angles(self.n_ch, self.n_vec):
            raise ValueError("wrong number of angles")

    @property
    def n_ch(self) -> int:
        return sum(self.multiplicities)

    @property
    def n_groups(self) -> int:
        return len(self.multiplicities)

    def vectors(self) -> np.ndarray:
        return householder_vectors(self.angles, self.n_ch, self.n_vec)

    def group_gram(self) -> np.ndarray:
        """``Q_g^T Q_g`` per group, shape ``(G, n_vec, n_vec)``."""
        q = self.vectors()
        edges = np.cumsum((0,) + self.multiplicities)
        return np.stack([q[a:b].T @ q[a:b] for a, b in zip(edges[:-1], edges[1:])])

    def copy(self) -> "KindParameters":
        return KindParameters(self.energies.copy(), self.widths.copy(), self.angles.copy(),
                              self.multiplicities, self.n_vec)

    def to_json(self) -> dict:
        return {
            "energies": self.energies.tolist(),
            "widths": self.widths.tolist(),
            "angles": self.angles.tolist(),
            "multiplicities": list(self.multiplicities),
            "n_vec": self.n_vec,
        }

    @classmethod
    def from_json(cls, d) -> "KindParameters":
        return cls(d["energies"], d["widths"], d["angles"], tuple(d["multiplicities"]), int(d["n_vec"]))


@dataclass
class TrialParameters:
    e: KindParameters
    h: KindParameters

    def __getitem__(self, kind) -> KindParameters:
        return self.e if kind == "e" else self.h

    def to_json(self) -> dict:
        return {"e": self.e.to_json(), "h": self.h.to_json()}

    @classmethod
    def from_json(cls, d) -> "TrialParameters":
        return cls(KindParameters.from_json(d["e"]), KindParameters.from_json(d["h"]))


@dataclass(frozen=True)
class SearchRanges:
    """Box for energies and widths; angles are always periodic in ``[0, 2 pi)``."""

    energy: tuple
    width: tuple

    @classmethod
    def default(cls, setting: QpeSetting) -> "SearchRanges":
        return cls((setting.e_orig, setting.e_orig + setting.window), (0.0, 2.0 / setting.t0))


@dataclass(frozen=True)
class MetropolisSchedule:
    n_steps: int = 40000
    n_runs: int = 256
    tau_start: float = 500.0
    tau_end: float = 4000.0
    swap_prob: float = 0.1
    min_step: float = 1e-4

    def tau(self, step: int) -> float:
        if self.n_steps <= 1:
            return self.tau_end
        return self.tau_start + (self.tau_end - self.tau_start) * step / (self.n_steps - 1)


@dataclass(frozen=True)
class CostConfig:
    tau_dec: float = 1.0
    weight_mode: str = "counts"

    def __post_init__(self):
        if self.weight_mode not in ("uniform", "counts", "gamma"):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")
        if self.tau_dec < 0:
            raise ValueError("tau_dec must be nonnegative")


def grid_weights(setting: QpeSetting, tau_dec: float) -> np.ndarray:
    g = np.exp(-tau_dec * np.arange(setting.n_val) / setting.t0)
    return g / g.sum()


def weighted_l1(a, b, g) -> float:
    """``sum_j g_j |a_j - b_j| / 2``."""
    return float(np.sum(g * np.abs(np.asarray(a) - np.asarray(b))) / 2)


def circuit_weights(n_sorb: int, mode: str = "uniform", hists: dict | None = None, gamma=None) -> dict:
    """``{kind: {circuit: weight}}`` with each kind normalized to 1.

    ``counts`` uses observed excitation masses of each circuit (averaged over
    settings); ``gamma`` uses the equivalent closed forms in ``gamma_meas``.
    """
    circ = circuits(n_sorb)
    n = n_sorb
    if mode == "uniform":
        return {k: {c: 1.0 / n**2 for c in circ} for k in KINDS}
    if mode == "gamma":
        g = np.real(np.diag(np.asarray(gamma)))
        tr = g.sum()
        if not 0 < tr < n:
            raise ValueError(f"tr gamma = {tr} leaves one excitation kind without weight")
        out = {"e": {}, "h": {}}
        for c in circ:
            occ = g[c[0]] if len(c) == 1 else (g[c[0]] + g[c[1]]) / 2
            out["e"][c] = (1 - occ) / (n * (n - tr))
            out["h"][c] = occ / (n * tr)
        return out
    if mode != "counts":
        raise ValueError(f"unknown weight mode {mode!r}")
    mass = {k: {} for k in KINDS}
    for c in circ:
        hs = [h for (p, cc), h in hists.items() if cc == c]
        if not hs:
            raise KeyError(f"missing circuit data: C{'_'.join(map(str, c))}")
        for k in KINDS:
            mass[k][c] = np.mean([h.kind_mass(k) for h in hs])
    out = {}
    for k in KINDS:
        sd = sum(mass[k][c] for c in circ if len(c) == 1)
        so = sum(mass[k][c] for c in circ if len(c) == 2)
        if sd <= 0 or (n > 1 and so <= 0):
            raise ValueError(f"no {k} excitations observed; weights undefined")
        out[k] = {c: (mass[k][c] / (n * sd) if len(c) == 1 else (1 - 1 / n) * mass[k][c] / so) for c in circ}
    return out


@dataclass
class SpinBlocks:
    """Map from full spin-orbital indices to a reconstruction block.

    With ``spin_block`` the two spin species share one ``n_sorb/2`` model
    (their gamma blocks are averaged); otherwise a single ``n_sorb`` model.
    """

    n_sorb: int
    spin_block: bool = True

    @property
    def n_eff(self) -> int:
        return self.n_sorb // 2 if self.spin_block else self.n_sorb

    def index(self, m: int) -> tuple[int, int]:
        if self.spin_block:
            return m % self.n_eff, m // self.n_eff
        return m, 0

    def reduce_gamma(self, gamma) -> np.ndarray:
        gamma = np.asarray(gamma)
        if not self.spin_block:
            return gamma
        n = self.n_eff
        return (gamma[:n, :n] + gamma[n:, n:]) / 2

    def expand(self, mat) -> np.ndarray:
        """Block-diagonal embedding of ``(..., n_eff, n_eff)`` into ``(..., n_sorb, n_sorb)``."""
        if not self.spin_block:
            return mat
        n = self.n_eff
        out = np.zeros(mat.shape[:-2] + (self.n_sorb, self.n_sorb), dtype=mat.dtype)
        out[..., :n, :n] = mat
        out[..., n:, n:] = mat
        return out


@dataclass
class NaturalFrame:
    """Measured occupancies and ``U_nat`` of the reconstruction block."""

    occupancies: np.ndarray
    u_nat: np.ndarray

    @classmethod
    def from_gamma(cls, gamma_blk, tol: float = 1e-9) -> "NaturalFrame":
        no = natural_orbitals(gamma_blk)
        n = no.occupancies
        if np.any(n < -tol) or np.any(n > 1 + tol):
            raise ValueError(f"natural occupancies outside [0, 1]: {n}")
        u = no.u_nat.real if np.isrealobj(gamma_blk) or not np.any(np.abs(no.u_nat.imag) > 0) else no.u_nat
        return cls(np.clip(n, 0.0, 1.0), u)

    def scale(self, kind: str) -> np.ndarray:
        return np.sqrt(1 - self.occupancies) if kind == "e" else np.sqrt(self.occupancies)

    def w_matrices(self, gram: np.ndarray, kind: str) -> np.ndarray:
        """``U^dagger D Q_g^T Q_g D U`` for each group, D the occupancy scale."""
        d = self.scale(kind)
        inner = d[None, :, None] * gram * d[None, None, :]
        return np.conj(self.u_nat.T)[None] @ inner @ self.u_nat[None]


class CostModel:
    """Precomputed data and row layout for one excitation kind.

    Rows are every ``(circuit, label)`` whose label belongs to ``kind``; the
    modeled distributions are ``coef (rows x groups) @ K (groups x P*N)``.
    """

    def __init__(self, kind: str, hists: dict, settings, weights: dict, frame: NaturalFrame,
                 blocks: SpinBlocks, cost: CostConfig):
        self.kind = kind
        self.settings = list(settings)
        self.frame = frame
        self.blocks = blocks
        n_sorb = blocks.n_sorb
        n_set = len(self.settings)
        nv = self.settings[0].n_val
        rows, data, rw = [], [], []
        ia, ib, alpha, beta, same = [], [], [], [], []
        for c in circuits(n_sorb):
            labels = [kind] if len(c) == 1 else [kind + "+", kind + "-"]
            for lab in labels:
                per_p = []
                for p in range(n_set):
                    if (p, c) not in hists:
                        raise KeyError(f"missing circuit data: C{'_'.join(map(str, c))} setting {p}")
                    h = hists[(p, c)]
                    if abs(h.mass() - 1) > 1e-6:
                        raise ValueError(f"histogram C{'_'.join(map(str, c))} setting {p} has mass {h.mass()}")
                    per_p.append(h.outcomes[lab])
                rows.append((c, lab))
                data.append(per_p)
                w = weights[kind][c]
                rw.append(w / n_set if len(c) == 1 else w / (2 * n_set))
                b0, s0 = blocks.index(c[0])
                if len(c) == 1:
                    ia.append(b0), ib.append(b0), alpha.append(0.5), beta.append(0.0), same.append(True)
                else:
                    b1, s1 = blocks.index(c[1])
                    ia.append(b0), ib.append(b1), alpha.append(0.25)
                    beta.append(0.5 if lab.endswith("+") else -0.5)
                    same.append(s0 == s1)
        self.rows = rows
        self.data = np.asarray(data, dtype=float).reshape(len(rows), n_set * nv)
        self.row_weight = np.asarray(rw)
        self.g = np.concatenate([grid_weights(s, cost.tau_dec) for s in self.settings])
        self.ia, self.ib = np.asarray(ia), np.asarray(ib)
        self.alpha = np.asarray(alpha)
        self.beta = np.asarray(beta) * np.asarray(same, dtype=float)
        self.phase = _PHASE[kind]
        self.n_set, self.n_val = n_set, nv

    def kernels(self, energies, widths) -> np.ndarray:
        """``(G, P*N)`` channel kernels for every group and setting."""
        return np.concatenate([channel_kernel(energies, widths, s) for s in self.settings], axis=1) \
            if len(energies) else np.zeros((0, self.n_set * self.n_val))

    def group_kernel(self, e: float, w: float) -> np.ndarray:
        return np.concatenate([channel_kernel(e, w, s) for s in self.settings])

    def coefficients(self, wmats: np.ndarray) -> np.ndarray:
        """``(rows, G)`` circuit weights of each group."""
        d = np.real(wmats[:, self.ia, self.ia] + wmats[:, self.ib, self.ib])
        x = np.real(self.phase * wmats[:, self.ia, self.ib])
        return (self.alpha[None, :] * d + self.beta[None, :] * x).T

    def modeled(self, coef, kern) -> np.ndarray:
        return coef @ kern

    def row_costs(self, model) -> np.ndarray:
        """Per row, per setting weighted L1 distances, shape ``(rows, P)``."""
        diff = np.abs(model - self.data) * self.g[None, :]
        return diff.reshape(len(self.rows), self.n_set, self.n_val).sum(axis=2) / 2

    def total(self, model) -> float:
        return float(np.sum(self.row_weight * self.row_costs(model).sum(axis=1)))

    def evaluate(self, par: KindParameters) -> float:
        w = self.frame.w_matrices(par.group_gram(), self.kind)
        return self.total(self.modeled(self.coefficients(w), self.kernels(par.energies, par.widths)))

    def breakdown(self, par: KindParameters) -> dict:
        """Partial cost of every circuit (averaged over settings and signs)."""
        w = self.frame.w_matrices(par.group_gram(), self.kind)
        rc = self.row_costs(self.modeled(self.coefficients(w), self.kernels(par.energies, par.widths)))
        out = {}
        for (c, lab), r in zip(self.rows, rc):
            key = "C" + "_".join(map(str, c))
            out[key] = out.get(key, 0.0) + float(r.mean()) / (1 if len(c) == 1 else 2)
        return out


def random_parameters(rng, multiplicities, n_vec, ranges: SearchRanges, init_width: float) -> KindParameters:
    """Energies spread evenly over the energy range, fixed width, random angles."""
    g = len(multiplicities)
    lo, hi = ranges.energy
    energies = lo + (np.arange(g) + 0.5) * (hi - lo) / g
    widths = np.full(g, min(max(init_width, ranges.width[0]), ranges.width[1]))
    angles = rng.uniform(0, 2 * np.pi, n_angles(sum(multiplicities), n_vec))
    return KindParameters(energies, widths, angles, tuple(multiplicities), n_vec)


def _reflect(x: float, lo: float, hi: float) -> float:
    span = hi - lo
    if span <= 0:
        return lo
    y = math.fmod(x - lo, 2 * span)
    if y < 0:
        y += 2 * span
    return lo + (y if y <= span else 2 * span - y)


@dataclass
class RunResult:
    params: KindParameters
    cost: float
    initial_cost: float
    best_trace: np.ndarray
    accepted: int


def metropolis_run(model: CostModel, start: KindParameters, ranges: SearchRanges,
                   schedule: MetropolisSchedule, rng) -> RunResult:
    """One annealing run; energies and widths reflect at the range edges."""
    rng = np.random.default_rng(rng)
    cur = start.copy()
    G = cur.n_groups
    n_ang = len(cur.angles)
    kern = model.kernels(cur.energies, cur.widths).reshape(G, -1)
    wm = model.frame.w_matrices(cur.group_gram(), model.kind)
    coef = model.coefficients(wm)
    f_cur = model.total(coef @ kern)
    best, f_best = cur.copy(), f_cur
    f0 = f_cur
    trace = np.empty(schedule.n_steps)
    accepted = 0
    e_span = ranges.energy[1] - ranges.energy[0]
    w_span = ranges.width[1] - ranges.width[0]
    n_par = 2 * G + n_ang
    log_min = math.log(schedule.min_step)
    for step in range(schedule.n_steps):
        tau = schedule.tau(step)
        new = cur.copy()
        new_kern, new_coef = kern, coef
        if G > 1 and rng.random() < schedule.swap_prob:
            a, b = rng.choice(G, 2, replace=False)
            new.energies[[a, b]] = new.energies[[b, a]]
            new.widths[[a, b]] = new.widths[[b, a]]
            new_kern = kern.copy()
            new_kern[[a, b]] = kern[[b, a]]
        else:
            i = int(rng.integers(n_par))
            mag = math.exp(rng.uniform(log_min, 0.0)) * (1 if rng.random() < 0.5 else -1)
            if i < 2 * G:
                g = i % G
                if i < G:
                    new.energies[g] = _reflect(new.energies[g] + mag * e_span, *ranges.energy)
                else:
                    new.widths[g] = _reflect(new.widths[g] + mag * w_span, *ranges.width)
                new_kern = kern.copy()
                new_kern[g] = model.group_kernel(new.energies[g], new.widths[g])
            else:
                k = i - 2 * G
                new.angles[k] = (new.angles[k] + mag * 2 * np.pi) % (2 * np.pi)
                new_coef = model.coefficients(model.frame.w_matrices(new.group_gram(), model.kind))
        f_new = model.total(new_coef @ new_kern)
        if f_new <= f_cur or rng.random() < math.exp(-tau * (f_new - f_cur)):
            cur, kern, coef, f_cur = new, new_kern, new_coef, f_new
            accepted += 1
            if f_cur < f_best:
                best, f_best = cur.copy(), f_cur
        trace[step] = f_best
    return RunResult(best, f_best, f0, trace, accepted)


@dataclass
class QavgProblem:
    """Everything a reconstruction needs, picklable for worker processes."""

    hists: dict
    settings: list
    gamma_meas: np.ndarray
    multiplicities: dict
    cost: CostConfig = field(default_factory=CostConfig)
    schedule: MetropolisSchedule = field(default_factory=MetropolisSchedule)
    ranges: SearchRanges | None = None
    spin_block: bool = True
    init_width: float | None = None

    @property
    def n_sorb(self) -> int:
        return np.asarray(self.gamma_meas).shape[0]

    def blocks(self) -> SpinBlocks:
        return SpinBlocks(self.n_sorb, self.spin_block)

    def frame(self) -> NaturalFrame:
        return NaturalFrame.from_gamma(self.blocks().reduce_gamma(self.gamma_meas))

    def weights(self) -> dict:
        return circuit_weights(self.n_sorb, self.cost.weight_mode, self.hists, self.gamma_meas)

    def search_ranges(self) -> SearchRanges:
        return self.ranges or SearchRanges.default(self.settings[0])

    def model(self, kind: str) -> CostModel:
        return CostModel(kind, self.hists, self.settings, self.weights(), self.frame(), self.blocks(), self.cost)

    def start(self, kind: str, rng) -> KindParameters:
        w0 = self.init_width if self.init_width is not None else 1.0 / self.settings[0].t0
        return random_parameters(rng, self.multiplicities[kind], self.blocks().n_eff, self.search_ranges(), w0)


def _worker(args):
    problem, kind, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    model = problem.model(kind)
    start = problem.start(kind, rng)
    return metropolis_run(model, start, problem.search_ranges(), problem.schedule, rng)


@dataclass
class ReconstructedGF:
    """Optimal parameters with the derived ``W`` matrices and GF evaluators."""

    params: TrialParameters
    frame: NaturalFrame
    blocks: SpinBlocks
    cost: dict
    breakdown: dict
    seed: int | None = None
    config_hash: str | None = None

    def w_matrices(self, kind: str) -> np.ndarray:
        """``(G, n_eff, n_eff)`` group matrices in the WBO block basis."""
        par = self.params[kind]
        return self.frame.w_matrices(par.group_gram(), kind)

    def _poles(self, z, kind):
        par = self.params[kind]
        sign = 1.0 if kind == "e" else -1.0
        return gquad(np.asarray(z)[:, None], sign * par.energies[None, :], par.widths[None, :])

    def evaluate(self, z, representation: str = "WBO", parts: bool = False):
        """``G_rec(z)`` as ``(n_z, n_sorb, n_sorb)`` in the WBO or NO basis."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = {}
        for kind in KINDS:
            par = self.params[kind]
            d = self.frame.scale(kind)
            gram = par.group_gram()
            g_no = np.einsum("zg,gab->zab", self._poles(z, kind), d[None, :, None] * gram * d[None, None, :])
            if representation.upper() == "NO":
                out[kind] = g_no
            elif representation.upper() == "WBO":
                u = self.frame.u_nat
                out[kind] = np.conj(u.T)[None] @ g_no @ u[None]
            else:
                raise ValueError(f"unknown representation {representation!r}")
            out[kind] = self.blocks.expand(out[kind])
        return (out["e"], out["h"]) if parts else out["e"] + out["h"]

    def to_json(self) -> dict:
        return {
            "parameters": self.params.to_json(),
            "cost": self.cost,
            "breakdown": self.breakdown,
            "occupancies": self.frame.occupancies.tolist(),
            "u_nat": np.real(self.frame.u_nat).tolist(),
            "w_matrices": {k: np.real(self.w_matrices(k)).tolist() for k in KINDS},
            "spin_block": self.blocks.spin_block,
            "n_sorb": self.blocks.n_sorb,
            "seed": self.seed,
            "config_hash": self.config_hash,
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")


def assemble(problem: QavgProblem, params: TrialParameters, seed=None) -> ReconstructedGF:
    cost, breakdown = {}, {}
    for kind in KINDS:
        model = problem.model(kind)
        cost[kind] = model.evaluate(params[kind])
        breakdown[kind] = model.breakdown(params[kind])
    return ReconstructedGF(params, problem.frame(), problem.blocks(), cost, breakdown, seed)


def optimize(problem: QavgProblem, seed: int, threads: int = 1, start: TrialParameters | None = None,
             return_runs: bool = False):
    """Best-of-runs Metropolis fit of both excitation kinds.

    Each run draws its own generator from ``SeedSequence(seed)``, so the result
    does not depend on ``threads``.  With ``start`` given, a single run per
    kind begins from it instead of random starts.
    """
    best = {}
    all_runs = {}
    root = np.random.SeedSequence(seed)
    kind_seqs = dict(zip(KINDS, root.spawn(len(KINDS))))
    for kind in KINDS:
        if start is not None:
            model = problem.model(kind)
            rng = np.random.default_rng(kind_seqs[kind])
            runs = [metropolis_run(model, start[kind], problem.search_ranges(), problem.schedule, rng)]
        else:
            seqs = kind_seqs[kind].spawn(problem.schedule.n_runs)
            jobs = [(problem, kind, s) for s in seqs]
            if threads > 1 and len(jobs) > 1:
                with ProcessPoolExecutor(max_workers=threads) as ex:
                    runs = list(ex.map(_worker, jobs))
            else:
                runs = [_worker(j) for j in jobs]
        i = int(np.argmin([r.cost for r in runs]))
        best[kind] = runs[i].params
        all_runs[kind] = runs
    rec = assemble(problem, TrialParameters(best["e"], best["h"]), seed)
    return (rec, all_runs) if return_runs else rec


def plant_parameters(spec: ThermalSpectrum, frame: NaturalFrame, blocks: SpinBlocks, kind: str,
                     tol: float = 1e-9, rank_tol: float = 1e-10) -> KindParameters:
    """Exact channels of ``spec`` written as trial parameters (widths 0).

    Channels are grouped by energy; each group's Gram matrix of renormalized
    natural-orbital amplitudes is factored into rows of ``Q``.
    """
    ch = spec.channels(kind)
    orbs = np.arange(blocks.n_eff)
    norm = spec.retained_weight
    amp = ch.amp[:, orbs] / math.sqrt(norm)
    d = frame.scale(kind)
    u = frame.u_nat
    proj = amp @ np.conj(u.T) if kind == "e" else amp @ u.T
    bt = proj / d[None, :]
    mats = np.conj(bt)[:, :, None] * bt[:, None, :] if kind == "e" else bt[:, :, None] * np.conj(bt)[:, None, :]
    keep = np.einsum("cii->c", np.real(mats)) > rank_tol
    grid = aggregate(ch.energy[keep], mats[keep], tol)
    rows, energies, mult = [], [], []
    for e, m in zip(grid.energy, grid.S):
        lam, vec = np.linalg.eigh(np.real(m))
        sel = lam > rank_tol
        if not np.any(sel):
            continue
        rows.append((np.sqrt(lam[sel])[:, None] * vec[:, sel].T))
        energies.append(e)
        mult.append(int(sel.sum()))
    q = np.concatenate(rows)
    angles, _ = angles_from_vectors(q)
    return KindParameters(np.array(energies), np.zeros(len(energies)), angles, tuple(mult), blocks.n_eff)
