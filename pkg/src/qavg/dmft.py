"""DMFT self-consistency on Matsubara frequencies with an exact-diagonalization bath.

Matrix functions of frequency are stored on the nonnegative Matsubara
frequencies ``n = 0 .. n_matsu`` only; negative ones follow from
``X(i w_{-n-1}) = X(i w_n)^dagger``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize

from .engine import CostConfig, MetropolisSchedule, QavgProblem, SearchRanges, optimize
from .greens import lehmann_gf, thermal_spectrum
from .hamiltonian import Kanamori, build_aim
from .qpe import estimate_gamma, exact_histograms, sample_all, shifted_settings

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


class NonConvergence(RuntimeError):
    pass


def matsubara(beta: float, n_matsu: int) -> np.ndarray:
    """``w_n = (2n + 1) pi / beta`` for ``n = 0 .. n_matsu``."""
    return (2 * np.arange(n_matsu + 1) + 1) * np.pi / beta


def local_gf(lattice, mu: float, sigma, z) -> np.ndarray:
    """Correlated block of the k-averaged lattice Green's function."""
    return lattice.local_gf_corr(z, mu, sigma)


def _inv_checked(a: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(a)
    bad = np.nonzero(~(cond < COND_LIMIT))[0]
    if len(bad):
        raise np.linalg.LinAlgError(f"{what} ill-conditioned at frequency index {bad[0]} (cond={cond[bad[0]]:.2e})")
    return np.linalg.inv(a)


def occupancy(lattice, mu: float, sigma, beta: float, n_matsu: int) -> float:
    """Electrons in the correlated orbitals, both spins, by Matsubara summation.

    The ``1/(i w)`` part is summed analytically and the ``c2/(i w)^2`` part is
    subtracted and added back in closed form, with ``c2 = <H>_corr - mu +
    Re Sigma(i w_max)``.
    """
    w = matsubara(beta, n_matsu)
    g = local_gf(lattice, mu, sigma, 1j * w)
    sig = np.asarray(sigma).reshape(len(w), lattice.n_corr, lattice.n_corr)
    c2 = np.real(np.diag(lattice.h_corr_local())) - mu + np.real(np.diag(sig[-1]))
    gd = np.real(np.einsum("zii->zi", g))
    body = (2 / beta) * np.sum(gd + c2[None, :] / w[:, None] ** 2, axis=0)
    return float(2 * np.sum(0.5 + body - c2 * beta / 4))


def tune_mu(lattice, sigma, target: float, beta: float, n_matsu: int, mu0: float = 0.0,
            tol: float = 1e-7, max_expand: int = 60) -> float:
    """Bisection for the chemical potential giving ``target`` electrons."""
    if not 0 < target < 2 * lattice.n_corr:
        raise ValueError(f"target occupancy {target} outside (0, {2 * lattice.n_corr})")

    def f(mu):
        return occupancy(lattice, mu, sigma, beta, n_matsu) - target

    step = 1.0
    lo, hi = mu0 - step, mu0 + step
    flo, fhi = f(lo), f(hi)
    for _ in range(max_expand):
        if flo <= 0 <= fhi:
            break
        step *= 2
        if flo > 0:
            lo, flo = lo - step, f(lo - step)
        if fhi < 0:
            hi, fhi = hi + step, f(hi + step)
    else:
        raise NonConvergence(f"no bracket for mu after {max_expand} expansions")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm < 0:
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if hi - lo < tol:
            break
    if fhi < flo - 1e-9:
        raise NonConvergence("occupancy decreased with mu during bisection")
    return 0.5 * (lo + hi)


@dataclass
class WeissField:
    """``G0^{-1}`` on the correlated block and the matching hybridization."""

    g0_inv: np.ndarray
    delta: np.ndarray
    iw: np.ndarray


def weiss_field(g_loc, sigma, iw, mu: float, h_corr) -> WeissField:
    """``G0^{-1} = G_loc^{-1} + Sigma`` and ``Delta = i w + mu - h_corr - G0^{-1}``."""
    g_inv = _inv_checked(np.asarray(g_loc), "local Green's function")
    g0_inv = g_inv + np.asarray(sigma)
    n = g0_inv.shape[-1]
    delta = (np.asarray(iw)[:, None, None] + mu) * np.eye(n) - np.asarray(h_corr)[None] - g0_inv
    return WeissField(g0_inv, delta, np.asarray(iw))


def dyson_self_energy(g0_inv, g_imp) -> np.ndarray:
    """``Sigma = G0^{-1} - G_imp^{-1}`` per frequency."""
    return np.asarray(g0_inv) - _inv_checked(np.asarray(g_imp), "impurity Green's function")


def bath_delta(z, eps_b, V) -> np.ndarray:
    """``Delta_ij(z) = sum_b conj(V_bi) V_bj / (z - eps_b)``."""
    z = np.asarray(z)
    V = np.asarray(V)
    r = 1.0 / (z[:, None] - np.asarray(eps_b)[None, :])
    return np.einsum("zb,bi,bj->zij", r, np.conj(V), V)


@dataclass
class BathFit:
    eps_b: np.ndarray
    V: np.ndarray
    residual: float


def _unpack(x, n_bath, n_corr, diagonal):
    eps = x[:n_bath]
    if diagonal:
        V = np.zeros((n_bath, n_corr))
        V[np.arange(n_bath), np.arange(n_bath) % n_corr] = x[n_bath:]
    else:
        V = x[n_bath:].reshape(n_bath, n_corr)
    return eps, V


def fit_bath(delta, iw, n_bath: int, weights=None, diagonal: bool = True, n_starts: int = 20,
             seed: int = 0, start: tuple | None = None, energy_scale: float | None = None,
             n_coarse: int = 128) -> BathFit:
    """Least-squares bath parameters for a target hybridization.

    Minimizes ``sum_n w_n ||Delta(i w_n) - Delta_bath(i w_n)||_F^2 / sum_n w_n``
    with Nelder-Mead from ``n_starts`` starting points, then polishes the best
    one with a trust-region least-squares solve.
    """
    if n_bath < 1:
        raise ValueError("n_bath must be >= 1")
    delta = np.asarray(delta)
    iw = np.asarray(iw)
    n_corr = delta.shape[-1]
    w = 1.0 / np.abs(iw) if weights is None else np.asarray(weights, dtype=float)
    sw = np.sqrt(w / w.sum())
    n_v = n_bath if diagonal else n_bath * n_corr

    def resid(x, sl=slice(None)):
        e, V = _unpack(x, n_bath, n_corr, diagonal)
        d = (bath_delta(iw[sl], e, V) - delta[sl]) * sw[sl, None, None]
        return np.concatenate([d.real.ravel(), d.imag.ravel()])

    def cost(x, sl=slice(None)):
        r = resid(x, sl)
        return float(r @ r)

    # the derivative-free stage only sees the low frequencies that dominate the weights
    coarse = slice(0, min(len(iw), n_coarse))

    # scale of the target: |Delta| ~ sum V^2 / w at the largest frequency
    tail = np.abs(np.einsum("zii->z", delta[-1:]) * iw[-1:]).max() / n_corr
    vscale = np.sqrt(max(tail, 1e-12) * n_corr / n_bath) if n_bath else 1.0
    escale = energy_scale or max(1.0, 2 * vscale)
    rng = np.random.default_rng(seed)
    starts = []
    if start is not None:
        e0, V0 = start
        x0 = np.concatenate([np.asarray(e0, dtype=float),
                             (np.asarray(V0)[np.arange(n_bath), np.arange(n_bath) % n_corr] if diagonal
                              else np.asarray(V0, dtype=float).ravel())])
        starts.append(x0)
    starts.append(np.concatenate([np.linspace(-escale, escale, n_bath), np.full(n_v, vscale)]))
    while len(starts) < n_starts:
        starts.append(np.concatenate([rng.uniform(-escale, escale, n_bath), rng.normal(0, vscale, n_v)]))
    best = None
    for x0 in starts:
        res = minimize(cost, x0, args=(coarse,), method="Nelder-Mead",
                       options={"maxiter": 400 * len(x0), "xatol": 1e-10, "fatol": 1e-16})
        if best is None or res.fun < best.fun:
            best = res
    pol = least_squares(resid, best.x, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    x = pol.x if cost(pol.x) <= cost(best.x) else best.x
    e, V = _unpack(x, n_bath, n_corr, diagonal)
    if not diagonal or n_corr == 1:
        # a diagonal bath keeps its round-robin site order
        order = np.argsort(e, kind="stable")
        e, V = e[order], V[order]
    return BathFit(e, V, cost(x))


def spin_average(g, n_corr: int, n_orb: int) -> np.ndarray:
    """Average of the spin-up and spin-down correlated blocks."""
    up = g[..., :n_corr, :n_corr]
    dn = g[..., n_orb:n_orb + n_corr, n_orb:n_orb + n_corr]
    return 0.5 * (up + dn)


@dataclass
class ImpurityResult:
    g_iw: np.ndarray
    gamma: np.ndarray
    info: dict = field(default_factory=dict)
    g_real: object = None


@dataclass
class FciSolver:
    """Exact Lehmann Green's function of the impurity model."""

    beta: float
    eps_b: float = 1e-4
    name: str = "fci"

    def solve(self, ham, iw) -> ImpurityResult:
        spec = thermal_spectrum(ham, self.beta, self.eps_b)
        nw = spec.retained_weight
        g = lehmann_gf(spec, iw) / nw

        def g_real(z):
            return spin_average(lehmann_gf(spec, z) / nw, ham.n_corr, ham.n_orb)

        return ImpurityResult(spin_average(g, ham.n_corr, ham.n_orb), spec.gamma() / nw,
                              {"retained_weight": nw}, g_real)


@dataclass
class QavgSolver:
    """Impurity Green's function reconstructed from simulated histograms."""

    beta: float
    multiplicities: dict
    eps_b: float = 1e-4
    t0: float = 6.0
    e_orig: float = -0.5
    n_qval: int = 7
    n_setting: int = 3
    shots: int = 0
    cost: CostConfig = field(default_factory=CostConfig)
    schedule: MetropolisSchedule = field(default_factory=MetropolisSchedule)
    ranges: SearchRanges | None = None
    spin_block: bool = True
    seed: int = 0
    threads: int = 1
    name: str = "qavg"
    _calls: int = 0

    def solve(self, ham, iw) -> ImpurityResult:
        spec = thermal_spectrum(ham, self.beta, self.eps_b)
        settings = shifted_settings(self.t0, self.e_orig, self.n_qval, self.n_setting)
        hists = exact_histograms(spec, settings)
        seed = int(np.random.SeedSequence([self.seed, self._calls]).generate_state(1)[0])
        self._calls += 1
        if self.shots:
            hists = sample_all(hists, self.shots, seed)
        merged = {c: h for (p, c), h in hists.items() if p == 0}
        gam = estimate_gamma(merged, spec.n_sorb, real=spec.is_real).gamma
        problem = QavgProblem(hists, settings, gam, self.multiplicities, self.cost, self.schedule,
                              self.ranges, self.spin_block)
        rec = optimize(problem, seed, self.threads)
        g = rec.evaluate(iw)

        def g_real(z):
            return spin_average(rec.evaluate(z), ham.n_corr, ham.n_orb)

        return ImpurityResult(spin_average(g, ham.n_corr, ham.n_orb), gam,
                              {"cost": rec.cost, "reconstruction": rec}, g_real)


@dataclass
class DmftConfig:
    beta: float
    kanamori: Kanamori
    n_bath: int = 3
    n_matsu: int = 2047
    target_occupancy: float | None = None
    mu: float = 0.0
    mixing: float = 0.7
    tol: float = 1e-3
    max_iter: int = 30
    n_metric: int = 100
    diagonal_bath: bool = True
    n_fit_starts: int = 20
    seed: int = 0


@dataclass
class DmftState:
    iteration: int
    mu: float
    sigma: np.ndarray
    eps_b: np.ndarray
    V: np.ndarray
    metric: float
    fit_residual: float
    history: list = field(default_factory=list)
    g_loc: np.ndarray | None = None
    g_imp: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "mu": self.mu,
            "bath": {"eps_b": self.eps_b.tolist(), "V": np.real(self.V).tolist()},
            "metric": self.metric,
            "fit_residual": self.fit_residual,
            "history": self.history,
        }


def write_matrix_csv(path, w, mats, header: str = "") -> None:
    """Rows ``w, m, m', Re, Im`` for a stack of matrices."""
    n = mats.shape[-1]
    lines = [header] if header else []
    lines.append("w,m,mp,re,im")
    for k, x in enumerate(w):
        for i in range(n):
            for j in range(n):
                v = mats[k, i, j]
                lines.append(f"{float(x)!r},{i},{j},{float(v.real)!r},{float(v.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path):
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    n = int(data[:, 1].max()) + 1
    w = data[:: n * n, 0]
    mats = (data[:, 3] + 1j * data[:, 4]).reshape(len(w), n, n)
    return w, mats


@dataclass
class DmftResult:
    states: list
    converged: bool
    final: DmftState
    solver_results: list = field(default_factory=list)


def dmft_iteration(lattice, cfg: DmftConfig, solver, sigma, mu, bath_start=None):
    """One pass: mu, local GF, Weiss field, bath fit, impurity solve, Dyson."""
    w = matsubara(cfg.beta, cfg.n_matsu)
    iw = 1j * w
    if cfg.target_occupancy is not None:
        mu = tune_mu(lattice, sigma, cfg.target_occupancy, cfg.beta, cfg.n_matsu, mu0=mu)
    g_loc = local_gf(lattice, mu, sigma, iw)
    h_corr = lattice.h_corr_local()
    wf = weiss_field(g_loc, sigma, iw, mu, h_corr)
    fit = fit_bath(wf.delta, iw, cfg.n_bath, diagonal=cfg.diagonal_bath, n_starts=cfg.n_fit_starts,
                   seed=cfg.seed, start=bath_start)
    ham = build_aim(h_corr - mu * np.eye(len(h_corr)), cfg.kanamori, fit.eps_b, fit.V)
    res = solver.solve(ham, iw)
    n = len(h_corr)
    g0_fit_inv = (iw[:, None, None] + mu) * np.eye(n) - h_corr[None] - bath_delta(iw, fit.eps_b, fit.V)
    sigma_new = dyson_self_energy(g0_fit_inv, res.g_iw)
    return mu, g_loc, fit, ham, res, sigma_new, g0_fit_inv


def run_dmft(lattice, cfg: DmftConfig, solver, out_dir=None, resume: bool = False, stamp: dict | None = None,
             keep_results: bool = False) -> DmftResult:
    """Iterate to self-consistency, persisting each iteration when ``out_dir`` is set."""
    n_corr = lattice.n_corr
    nw = cfg.n_matsu + 1
    sigma = np.zeros((nw, n_corr, n_corr), dtype=complex)
    mu = cfg.mu
    bath_start = None
    start_it = 0
    states = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if resume:
            prev = load_latest_state(out)
            if prev is not None:
                states.append(prev)
                sigma, mu, start_it = prev.sigma, prev.mu, prev.iteration + 1
                bath_start = (prev.eps_b, prev.V)
    extra = []
    converged = False
    w = matsubara(cfg.beta, cfg.n_matsu)
    for it in range(start_it, cfg.max_iter):
        mu, g_loc, fit, ham, res, sigma_new, _ = dmft_iteration(lattice, cfg, solver, sigma, mu, bath_start)
        mixed = cfg.mixing * sigma_new + (1 - cfg.mixing) * sigma
        k = min(cfg.n_metric, nw - 1)
        metric = float(np.max(np.abs(mixed[: k + 1] - sigma[: k + 1])))
        sigma = mixed
        bath_start = (fit.eps_b, fit.V)
        hist = (states[-1].history if states else []) + [metric]
        st = DmftState(it, float(mu), sigma, fit.eps_b, fit.V, metric, fit.residual, hist, g_loc, res.g_iw)
        states.append(st)
        if keep_results:
            extra.append(res)
        log.info("iteration %d: mu=%.6f metric=%.3e fit=%.2e", it, mu, metric, fit.residual)
        if out is not None:
            save_state(out, st, w, stamp or {})
        if metric < cfg.tol:
            converged = True
            break
    return DmftResult(states, converged, states[-1], extra)


def save_state(out: Path, st: DmftState, w, stamp: dict) -> None:
    tag = f"iter_{st.iteration:03d}"
    header = "# " + " ".join(f"{k}={v}" for k, v in stamp.items()) if stamp else ""
    write_matrix_csv(out / f"sigma_{tag}.csv", w, st.sigma, header)
    data = dict(stamp)
    data.update(st.to_json())
    data["sigma_csv"] = f"sigma_{tag}.csv"
    (out / f"state_{tag}.json").write_text(json.dumps(data, indent=1) + "\n")


def load_latest_state(out: Path) -> DmftState | None:
    files = sorted(Path(out).glob("state_iter_*.json"))
    if not files:
        return None
    d = json.loads(files[-1].read_text())
    _, sigma = read_matrix_csv(Path(out) / d["sigma_csv"])
    return DmftState(int(d["iteration"]), float(d["mu"]), sigma, np.asarray(d["bath"]["eps_b"]),
                     np.asarray(d["bath"]["V"]), float(d["metric"]), float(d["fit_residual"]),
                     list(d["history"]))


def real_axis_self_energy(lattice, state: DmftState, solver_result: ImpurityResult, omega,
                          delta: float = 0.02) -> np.ndarray:
    """``Sigma(w + i delta)`` from the fitted bath and the solver's real-axis Green's function."""
    z = np.asarray(omega) + 1j * delta
    n = state.sigma.shape[-1]
    g0_inv = ((z[:, None, None] + state.mu) * np.eye(n) - lattice.h_corr_local()[None]
              - bath_delta(z, state.eps_b, state.V))
    return g0_inv - np.linalg.inv(solver_result.g_real(z))


def momentum_resolved_dos(lattice, state: DmftState, solver_result: ImpurityResult, omega,
                          delta: float = 0.02) -> np.ndarray:
    """``A(k, w) = -Im tr G(k, w + i delta) / pi`` with ``(n_k, n_w)`` layout.

    A Bethe lattice is resolved on its band-energy quadrature nodes.
    """
    sigma = real_axis_self_energy(lattice, state, solver_result, omega, delta)
    lat = lattice if hasattr(lattice, "lattice_gf") else lattice.as_lattice()
    z = np.asarray(omega) + 1j * delta
    gk = lat.lattice_gf(z, state.mu, sigma)
    return -np.einsum("kzii->kz", gk).imag / np.pi
