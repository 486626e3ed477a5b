import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import BETA, dimer
from qavg.engine import (CostConfig, KindParameters, MetropolisSchedule, NaturalFrame, QavgProblem,
                         ReconstructedGF, SearchRanges, SpinBlocks, TrialParameters, _reflect, assemble,
                         circuit_weights, grid_weights, metropolis_run, optimize, plant_parameters,
                         random_parameters, weighted_l1)
from qavg.greens import lehmann_gf, thermal_spectrum
from qavg.hamiltonian import hubbard_atom
from qavg.householder import n_angles
from qavg.qpe import estimate_gamma, exact_histograms, shifted_settings

SETTINGS = shifted_settings()


def problem_for(ham, mult=(1, 1, 1), **kw):
    spec = thermal_spectrum(ham, BETA, 1e-4)
    hs = exact_histograms(spec, SETTINGS)
    gam = estimate_gamma({c: h for (p, c), h in hs.items() if p == 0}, spec.n_sorb, real=True).gamma
    return spec, QavgProblem(hs, SETTINGS, gam, {"e": mult, "h": mult}, **kw)


@pytest.fixture(scope="module")
def dimer_problem():
    return problem_for(dimer())


def planted(spec, problem):
    fr, bl = problem.frame(), problem.blocks()
    return TrialParameters(plant_parameters(spec, fr, bl, "e"), plant_parameters(spec, fr, bl, "h"))


@pytest.mark.parametrize("make", [lambda: hubbard_atom(2.0), dimer])
def test_planted_parameters_reproduce_data(make):
    spec, problem = problem_for(make())
    rec = assemble(problem, planted(spec, problem))
    assert rec.cost["e"] < 1e-12 and rec.cost["h"] < 1e-12
    z = 1j * np.pi / BETA * (2 * np.arange(-21, 21) + 1)
    exact = lehmann_gf(spec, z) / spec.retained_weight
    assert np.abs(rec.evaluate(z) - exact).max() < 1e-10


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1,), (1, 2), (2, 1, 1), (3, 3)]), st.integers(1, 3))
def test_w_matrix_sum_rules(seed, mult, n):
    rng = np.random.default_rng(seed)
    if sum(mult) < n:
        return
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    u, _ = np.linalg.qr(a)
    occ = rng.uniform(0, 1, n)
    gam = u @ np.diag(occ) @ u.conj().T
    fr = NaturalFrame.from_gamma(gam)
    par = random_parameters(rng, mult, n, SearchRanges((0, 1), (0, 1)), 0.1)
    we = fr.w_matrices(par.group_gram(), "e").sum(axis=0)
    wh = fr.w_matrices(par.group_gram(), "h").sum(axis=0)
    assert abs(np.trace(we) - (n - np.trace(gam))) < 1e-10
    assert abs(np.trace(wh) - np.trace(gam)) < 1e-10
    assert np.allclose(we + wh, np.eye(n), atol=1e-10)


def test_kind_parameters_validation_and_json():
    rng = np.random.default_rng(0)
    p = random_parameters(rng, (2, 1), 2, SearchRanges((-1, 3), (0, 0.5)), 0.2)
    assert p.energies.tolist() == pytest.approx([0.0, 2.0]) and np.all(p.widths == 0.2)
    back = KindParameters.from_json(json.loads(json.dumps(p.to_json())))
    assert np.array_equal(back.angles, p.angles) and back.multiplicities == (2, 1)
    with pytest.raises(ValueError):
        KindParameters([0.0], [0.1], np.zeros(n_angles(1, 2)), (1,), 2)
    with pytest.raises(ValueError):
        KindParameters([0.0], [-0.1], np.zeros(n_angles(2, 2)), (2,), 2)


def test_spin_blocks():
    b = SpinBlocks(6)
    assert b.n_eff == 3 and b.index(4) == (1, 1)
    g = np.diag([0.1, 0.2, 0.3, 0.3, 0.4, 0.5])
    assert np.allclose(b.reduce_gamma(g), np.diag([0.2, 0.3, 0.4]))
    e = b.expand(np.ones((2, 3, 3)))
    assert e.shape == (2, 6, 6) and e[0, 0, 4] == 0 and e[1, 5, 3] == 1
    assert SpinBlocks(6, False).n_eff == 6


@pytest.mark.parametrize("mode", ["uniform", "counts", "gamma"])
def test_circuit_weights_normalized(dimer_problem, mode):
    spec, pr = dimer_problem
    w = circuit_weights(4, mode, pr.hists, pr.gamma_meas)
    for k in ("e", "h"):
        assert sum(w[k].values()) == pytest.approx(1.0)
        assert all(v >= 0 for v in w[k].values())


def test_counts_and_gamma_weights_agree(dimer_problem):
    spec, pr = dimer_problem
    a = circuit_weights(4, "counts", pr.hists)
    b = circuit_weights(4, "gamma", None, pr.gamma_meas)
    for k in ("e", "h"):
        assert all(a[k][c] == pytest.approx(b[k][c], abs=1e-12) for c in a[k])


def test_grid_weights_and_l1():
    g = grid_weights(SETTINGS[0], 1.0)
    assert g.sum() == pytest.approx(1.0) and np.all(np.diff(g) < 0)
    assert np.allclose(grid_weights(SETTINGS[0], 0.0), 1 / 128)
    assert weighted_l1([1, 0], [0, 1], [0.5, 0.5]) == pytest.approx(0.5)


@given(st.floats(-50, 50), st.floats(-3, 3), st.floats(0.01, 5))
def test_reflect_stays_in_range(x, lo, span):
    y = _reflect(x, lo, lo + span)
    assert lo - 1e-12 <= y <= lo + span + 1e-12
    if lo <= x <= lo + span:
        assert y == pytest.approx(x)


def test_schedule_ramp():
    s = MetropolisSchedule(n_steps=11)
    assert s.tau(0) == 500 and s.tau(10) == 4000 and s.tau(5) == pytest.approx(2250)


def test_metropolis_run_monotone_and_reproducible(dimer_problem):
    _, pr = dimer_problem
    model = pr.model("e")
    sched = MetropolisSchedule(n_steps=300)
    start = pr.start("e", np.random.default_rng(1))
    a = metropolis_run(model, start, pr.search_ranges(), sched, 5)
    b = metropolis_run(model, start, pr.search_ranges(), sched, 5)
    assert a.cost == b.cost and np.array_equal(a.params.angles, b.params.angles)
    assert np.all(np.diff(a.best_trace) <= 0) and a.cost <= a.initial_cost
    assert a.cost == pytest.approx(model.evaluate(a.params))
    lo, hi = pr.search_ranges().energy
    assert np.all((a.params.energies >= lo) & (a.params.energies <= hi))


def test_optimize_independent_of_threads(dimer_problem):
    _, pr = dimer_problem
    pr2 = QavgProblem(pr.hists, pr.settings, pr.gamma_meas, pr.multiplicities,
                      schedule=MetropolisSchedule(n_steps=100, n_runs=3))
    a, b = optimize(pr2, 9, threads=1), optimize(pr2, 9, threads=2)
    assert a.cost == b.cost


def test_missing_circuit_in_cost_model(dimer_problem):
    _, pr = dimer_problem
    hs = {k: v for k, v in pr.hists.items() if k != (1, (2, 3))}
    with pytest.raises(KeyError, match="C2_3"):
        QavgProblem(hs, pr.settings, pr.gamma_meas, pr.multiplicities, CostConfig(weight_mode="gamma")).model("e")


def test_reconstruction_representations_and_dump(dimer_problem, tmp_path):
    spec, pr = dimer_problem
    rec = assemble(pr, planted(spec, pr), seed=4)
    z = np.array([0.4j, 1.1j])
    g_no = rec.evaluate(z, "NO")
    u = rec.frame.u_nat
    assert np.allclose(rec.evaluate(z)[:, :2, :2], u.conj().T @ g_no[:, :2, :2] @ u)
    with pytest.raises(ValueError):
        rec.evaluate(z, "XYZ")
    rec.dump(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["seed"] == 4 and TrialParameters.from_json(d["parameters"]).e.n_vec == 2
    assert isinstance(rec, ReconstructedGF)
