"""Acceptance criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
PASS/FAIL line per criterion.
"""
import os
import time

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import BETA, random_kanamori_aim, two_orbital_one_bath
from oracles import fock_hamiltonian, resolvent_gf
from qavg.dmft import (DmftConfig, FciSolver, QavgSolver, bath_delta, dyson_self_energy, fit_bath, local_gf,
                       matsubara, run_dmft)
from qavg.engine import (MetropolisSchedule, NaturalFrame, QavgProblem, SearchRanges, optimize,
                         random_parameters)
from qavg.fictitious import gquad, rho_quad
from qavg.greens import lehmann_gf, matsubara_frequencies, spectral_matrices, thermal_spectrum
from qavg.hamiltonian import Kanamori, build_aim, hubbard_atom
from qavg.householder import householder_vectors, n_angles
from qavg.lattice import BetheLattice
from qavg.qpe import (estimate_gamma_diag, exact_histograms, offdiag_excitation_distribution, qpe_kernel,
                      recover_offdiag, sample_histogram, shifted_settings, shot_budget, spectral_binned)

SETTINGS = shifted_settings()
CI_SYSTEMS = {
    "hubbard atom": lambda: hubbard_atom(2.0),
    "2 orbitals + 1 bath": two_orbital_one_bath,
    "random Kanamori n_sorb=8": random_kanamori_aim,
}
THREADS = os.cpu_count() or 1


@pytest.mark.criterion(1, "Lehmann GF equals many-body resolvent oracle (1e-9, 50 frequencies)")
def test_lehmann_resolvent_equivalence(record):
    t = time.perf_counter()
    rng = np.random.default_rng(0)
    z = np.concatenate([rng.uniform(-4, 4, 30) + 1j * rng.uniform(0.05, 2, 30),
                        1j * matsubara_frequencies(BETA, 10, negative=True)[1][:20]])
    assert len(z) == 50
    worst = 0.0
    for name, make in CI_SYSTEMS.items():
        ham = make()
        k = ham.kanamori
        h, c = fock_hamiltonian(np.asarray(ham.h), ham.n_corr, k.U, k.U0, k.J, k.density_only)
        err = np.abs(lehmann_gf(thermal_spectrum(ham, BETA, 0.0), z) - resolvent_gf(h, c, BETA, z)).max()
        worst = max(worst, err)
    dt = time.perf_counter() - t
    record(f"max err {worst:.1e}, {dt:.1f} s")
    assert worst < 1e-9 and dt < 60


@pytest.mark.criterion(2, "spectral sum rules exact at eps_B=0, deficit bounded by discarded weight")
def test_spectral_sum_rules(record):
    worst, worst_def = 0.0, 0.0
    for make in CI_SYSTEMS.values():
        ham = make()
        spec = thermal_spectrum(ham, BETA, 0.0)
        g = spectral_matrices(spec)
        gam = np.real(np.diag(spec.gamma()))
        se, sh = np.real(np.diag(g["e"].total())), np.real(np.diag(g["h"].total()))
        worst = max(worst, np.abs(se - (1 - gam)).max(), np.abs(sh - gam).max())
        tr = thermal_spectrum(ham, BETA, 1e-4)
        g = spectral_matrices(tr)
        deficit = 1 - np.real(np.diag(g["e"].total() + g["h"].total()))
        discarded = 1 - tr.retained_weight
        worst_def = max(worst_def, deficit.max() - discarded)
    record(f"sum rule err {worst:.1e}, deficit minus discarded {worst_def:.1e}")
    assert worst < 1e-10 and worst_def < 1e-12


@pytest.mark.criterion(3, "diagonal hole mass, four-outcome masses and bin-wise recovery (1e-10)")
def test_measurement_model_identities(record):
    t = time.perf_counter()
    ph = np.exp(1j * np.pi / 4)
    e_mass = e_four = e_rec = 0.0
    for make in CI_SYSTEMS.values():
        spec = thermal_spectrum(make(), BETA, 1e-4)
        g = spec.gamma() / spec.retained_weight
        hs = exact_histograms(spec, SETTINGS[:1])
        n = spec.n_sorb
        for m in range(n):
            e_mass = max(e_mass, abs(hs[(0, (m,))].mass("h") - g[m, m]))
        for m in range(n):
            for mp in range(n):
                if m == mp:
                    continue
                h = hs[(0, (m, mp))]
                base = (g[m, m] + g[mp, mp]).real / 4
                want = {"h+": base + np.real(ph * g[m, mp]) / 2, "h-": base - np.real(ph * g[m, mp]) / 2,
                        "e+": 0.5 - base - np.real(np.conj(ph) * g[m, mp]) / 2,
                        "e-": 0.5 - base + np.real(np.conj(ph) * g[m, mp]) / 2}
                e_four = max(e_four, max(abs(h.mass(k) - v) for k, v in want.items()))
                for s in SETTINGS:
                    a = offdiag_excitation_distribution(spec, m, mp, s)
                    b = offdiag_excitation_distribution(spec, mp, m, s)
                    for kind in ("e", "h"):
                        ref = spectral_binned(spec, (m, mp), s, kind)
                        e_rec = max(e_rec, np.abs(recover_offdiag(a, b, kind) - ref).max())
    dt = time.perf_counter() - t
    record(f"hole mass {e_mass:.1e}, four-outcome {e_four:.1e}, recovery {e_rec:.1e}, {dt:.1f} s")
    assert max(e_mass, e_four, e_rec) < 1e-10 and dt < 60


@pytest.mark.criterion(4, "Chebyshev shot bound: failure rate <= 0.1 over 2000 trials")
def test_shot_bound(record):
    eps, p_fail = 0.05, 0.1
    m_d, m_od, _ = shot_budget(8, eps, p_fail)
    assert (m_d, m_od) == (1000, 2000)
    spec = thermal_spectrum(random_kanamori_aim(), BETA, 1e-4)
    hs = exact_histograms(spec, SETTINGS[:1])
    rng = np.random.default_rng(2024)
    rates = []
    for m in range(spec.n_sorb):
        ex = hs[(0, (m,))]
        g = ex.mass("h")
        fails = 0
        for _ in range(2000):
            s = sample_histogram(ex, m_d, rng)
            est = estimate_gamma_diag(np.sum(s.outcomes["h"]) * m_d, m_d)
            fails += abs(est - g) >= eps
        rates.append(fails / 2000)
    record(f"M_d={m_d}, worst failure rate {max(rates):.4f}")
    assert max(rates) <= p_fail


@pytest.mark.criterion(5, "analytic fictitious GF equals quadrature (1e-8); density normalized (1e-12)")
def test_fictitious_gf(record):
    rng = np.random.default_rng(5)
    worst, worst_norm = 0.0, 0.0
    for _ in range(1000):
        z = complex(rng.uniform(-5, 5), rng.uniform(0.02, 3))
        e0, w = rng.uniform(-3, 3), rng.uniform(0.01, 3)
        a = w / 2
        f = lambda u, part: part(rho_quad(u, w) / (z - e0 - u))
        ref = quad(f, -a, a, args=(np.real,), epsabs=1e-13, epsrel=1e-13, limit=200)[0] \
            + 1j * quad(f, -a, a, args=(np.imag,), epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        worst = max(worst, abs(complex(gquad(z, e0, w)) - ref))
    for w in rng.uniform(0.01, 3, 50):
        worst_norm = max(worst_norm, abs(quad(lambda u: rho_quad(u, w), -w / 2, w / 2, epsabs=1e-15)[0] - 1))
    record(f"max err {worst:.1e}, norm err {worst_norm:.1e}")
    assert worst < 1e-8 and worst_norm < 1e-12


@pytest.mark.criterion(6, "Householder counts 123 / 51 and Gram identity (1e-12, 1000 draws)")
def test_householder(record):
    assert n_angles(24, 6) == 123 and n_angles(12, 6) == 51
    rng = np.random.default_rng(6)
    worst = 0.0
    for i in range(1000):
        m, n = (24, 6) if i % 2 else (12, 6)
        q = householder_vectors(rng.uniform(0, 2 * np.pi, n_angles(m, n)), m, n)
        worst = max(worst, np.abs(q.T @ q - np.eye(n)).max())
    record(f"max Gram err {worst:.1e}")
    assert worst < 1e-12


@pytest.mark.criterion(7, "plant-and-recover on 4 spin orbitals: cost < 1e-2, trace err < 0.05")
@pytest.mark.slow
def test_plant_and_recover(record):
    # one correlated orbital and one bath level: two electron and two hole
    # channel energies per spin block, so three groups per kind suffice
    ham = build_aim([[-1.0]], Kanamori(U=2.0), [0.0], [[0.6]])
    spec = thermal_spectrum(ham, BETA, 1e-4)
    hs = exact_histograms(spec, SETTINGS)
    gam = spec.gamma() / spec.retained_weight
    problem = QavgProblem(hs, SETTINGS, gam, {"e": (1, 1, 1), "h": (1, 1, 1)},
                          schedule=MetropolisSchedule(n_steps=10_000, n_runs=8))
    t = time.perf_counter()
    rec = optimize(problem, seed=7, threads=THREADS)
    dt = time.perf_counter() - t
    n, w = matsubara_frequencies(BETA, 20)
    z = 1j * w
    tr = np.einsum("zii->z", rec.evaluate(z))
    tr_ex = np.einsum("zii->z", lehmann_gf(spec, z)) / spec.retained_weight
    err = np.abs(tr - tr_ex).max()
    cost = max(rec.cost.values())
    record(f"cost {cost:.1e}, trace err {err:.1e}, {dt:.0f} s on {THREADS} core(s)")
    assert cost < 1e-2 and err < 0.05 and dt < 600 * max(1, 8 // THREADS)


@pytest.mark.criterion(8, "W-matrix sum rules for random parameters (1e-10)")
def test_w_sum_rules(record):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        mult = tuple(int(x) for x in rng.integers(1, 4, size=int(rng.integers(1, 5))))
        if sum(mult) < n:
            mult = mult + (n,)
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        u, _ = np.linalg.qr(a)
        gam = u @ np.diag(rng.uniform(0, 1, n)) @ u.conj().T
        fr = NaturalFrame.from_gamma(gam)
        par = random_parameters(rng, mult, n, SearchRanges((0, 5), (0, 1)), 0.2)
        gram = par.group_gram()
        se = np.trace(fr.w_matrices(gram, "e").sum(axis=0))
        sh = np.trace(fr.w_matrices(gram, "h").sum(axis=0))
        worst = max(worst, abs(se - (n - np.trace(gam))), abs(sh - np.trace(gam)))
    record(f"max err {worst:.1e}")
    assert worst < 1e-10


@pytest.mark.criterion(9, "DMFT fixed points: U=0, bath plant, Hubbard-atom Dyson")
def test_dmft_fixed_points(record):
    cfg = DmftConfig(BETA, Kanamori(U=0.0))
    res = run_dmft(BetheLattice(2.0, 1), cfg, FciSolver(BETA, eps_b=0.0))
    s0 = np.abs(res.final.sigma).max()
    iw = 1j * matsubara(BETA, 2047)
    eps, V = np.array([-1.0, 0.1, 0.8]), np.array([[0.45], [0.3], [0.55]])
    fit = fit_bath(bath_delta(iw, eps, V), iw, 3)
    U = 2.0
    g = FciSolver(BETA, eps_b=0.0).solve(hubbard_atom(U), iw).g_iw
    sigma = dyson_self_energy((iw + U / 2)[:, None, None], g)[:, 0, 0]
    e_dyson = np.abs(sigma - (U / 2 + U**2 / 4 / iw)).max()
    record(f"iterations {len(res.states)}, |Sigma| {s0:.1e}, fit residual {fit.residual:.1e}, "
           f"Dyson err {e_dyson:.1e}")
    assert res.converged and len(res.states) == 1 and s0 < 1e-10
    assert fit.residual < 1e-10 and e_dyson < 1e-8


@pytest.mark.criterion(10, "Bethe end-to-end: FCI converges in 10 iterations, 3 QAVG iterations within 0.1")
@pytest.mark.slow
def test_bethe_end_to_end(record):
    lat = BetheLattice(2.0, 1)
    U = 2.0
    t = time.perf_counter()
    # half filling is fixed by particle-hole symmetry at mu = U/2
    cfg = DmftConfig(BETA, Kanamori(U=U), n_bath=3, mu=U / 2, max_iter=10)
    fci = run_dmft(lat, cfg, FciSolver(BETA))
    t_fci = time.perf_counter() - t
    iw = 1j * matsubara(BETA, cfg.n_matsu)
    tr_fci = np.einsum("zii->z", local_gf(lat, fci.final.mu, fci.final.sigma[:21], iw[:21]))

    mult = (1,) * 6
    solver = QavgSolver(BETA, {"e": mult, "h": mult}, ranges=SearchRanges((-0.5, 5.5), (0.0, 1 / 3)),
                        schedule=MetropolisSchedule(n_steps=10_000, n_runs=8, tau_end=1e5), seed=1,
                        threads=THREADS)
    t = time.perf_counter()
    qcfg = DmftConfig(BETA, Kanamori(U=U), n_bath=3, mu=U / 2, max_iter=3)
    qavg = run_dmft(lat, qcfg, solver)
    t_q = time.perf_counter() - t
    tr_q = np.einsum("zii->z", local_gf(lat, qavg.final.mu, qavg.final.sigma[:21], iw[:21]))
    # negative frequencies are complex conjugates, so n = 0..20 covers |n| <= 20
    dev = np.abs(tr_q - tr_fci).max()
    record(f"FCI metric {fci.final.metric:.1e} after {len(fci.states)} it in {t_fci:.0f} s; "
           f"QAVG {len(qavg.states)} it in {t_q:.0f} s, trace dev {dev:.3f}")
    assert fci.converged and len(fci.states) <= 10 and t_fci < 1800
    assert len(qavg.states) == 3 and dev < 0.1
