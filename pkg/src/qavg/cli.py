"""Command-line entry point: ``qavg {solve,sample,reconstruct,dmft,channels}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .dmft import (DmftConfig, FciSolver, NonConvergence, QavgSolver, matsubara, momentum_resolved_dos,
                   real_axis_self_energy, run_dmft, write_matrix_csv)
from .eigen import count_excitation_channels
from .engine import CostConfig, MetropolisSchedule, QavgProblem, SearchRanges, optimize
from .greens import dos, lehmann_gf, matsubara_frequencies, thermal_spectrum
from .hamiltonian import Kanamori, build_aim
from .lattice import BetheLattice, read_lattice_file
from .qpe import (Histogram, aliased_weight, circuits, estimate_gamma, exact_histograms, sample_all,
                  shifted_settings)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 2, 3, 4

log = logging.getLogger("qavg")


def _kanamori(cfg) -> Kanamori:
    k = cfg.system.kanamori
    return Kanamori(k.U, k.U0, k.J, k.density_only)


def build_hamiltonian(cfg):
    s = cfg.system
    if s.type != "aim":
        raise cfgmod.ConfigError("system.type: this command needs an explicit impurity model (aim)")
    h = np.asarray(s.h_corr_ev, dtype=float)
    eb = np.asarray(s.bath_energies_ev, dtype=float)
    V = np.asarray(s.bath_hybridization_ev, dtype=float).reshape(len(eb), h.shape[0]) if len(eb) else None
    try:
        ham = build_aim(h, _kanamori(cfg), eb, V)
    except ValueError as exc:
        raise cfgmod.ConfigError(f"system: {exc}") from exc
    if ham.n_sorb > 16:
        raise cfgmod.ConfigError(f"system: {ham.n_sorb} spin orbitals exceed the dense solver limit of 16")
    return ham


def build_lattice(cfg):
    s = cfg.system
    if s.type == "bethe":
        return BetheLattice(s.half_bandwidth_ev, s.n_corr, s.n_dos_points)
    if s.type == "lattice":
        return read_lattice_file(s.lattice_file, s.corr_mask)
    raise cfgmod.ConfigError("system.type: dmft needs a bethe or lattice system")


def settings_of(cfg):
    q = cfg.qpe
    return shifted_settings(q.t0_per_ev, q.e_orig_ev, q.n_qval, q.n_setting)


def schedule_of(cfg) -> MetropolisSchedule:
    a = cfg.qavg
    return MetropolisSchedule(a.n_steps, a.n_runs, a.tau_metro_start, a.tau_metro_end, a.swap_prob)


def ranges_of(cfg):
    a = cfg.qavg
    if a.energy_range_ev is None and a.width_range_ev is None:
        return None
    base = SearchRanges.default(settings_of(cfg)[0])
    return SearchRanges(tuple(a.energy_range_ev or base.energy), tuple(a.width_range_ev or base.width))


class Output:
    """Writes files that all carry the config hash and seed."""

    def __init__(self, out_dir, cfg, seed):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.stamp = {"config_hash": cfg.config_hash(), "seed": seed}

    def json(self, name, data) -> Path:
        d = dict(self.stamp)
        d.update(data)
        p = self.dir / name
        p.write_text(json.dumps(d, indent=1) + "\n")
        return p

    def csv(self, name, header, rows) -> Path:
        lines = ["# " + " ".join(f"{k}={v}" for k, v in self.stamp.items()), ",".join(header)]
        lines += [",".join(_fmt(x) for x in r) for r in rows]
        p = self.dir / name
        p.write_text("\n".join(lines) + "\n")
        return p


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def gf_rows(z, g):
    n = g.shape[-1]
    for k, zz in enumerate(z):
        for i in range(n):
            for j in range(n):
                yield (zz.real, zz.imag, i, j, g[k, i, j].real, g[k, i, j].imag)


GF_HEADER = ("re_z", "im_z", "m", "mp", "re_g", "im_g")


def omega_grid(cfg):
    o = cfg.output
    return np.linspace(o.omega_min_ev, o.omega_max_ev, o.n_omega)


def cmd_solve(cfg, args, out: Output) -> int:
    ham = build_hamiltonian(cfg)
    spec = thermal_spectrum(ham, cfg.beta, cfg.thermo.eps_b)
    spec.solution.dump(out.dir / "spectrum.json", **out.stamp, retained_weight=spec.retained_weight,
                       n_initial=len(spec.initial))
    n, w = matsubara_frequencies(cfg.beta, cfg.output.n_matsu_out)
    z = 1j * w
    g = lehmann_gf(spec, z) / spec.retained_weight
    out.csv("gf_matsubara.csv", GF_HEADER, gf_rows(z, g))
    w = omega_grid(cfg)
    rho = dos(spec, w, cfg.output.dos_delta_ev) / spec.retained_weight
    out.csv("dos.csv", ("omega", "rho"), zip(w, rho))
    log.info("solve: %d states retained, ground energy %.6f eV", len(spec.initial), spec.solution.e_ground)
    return EXIT_OK


def cmd_channels(cfg, args, out: Output) -> int:
    ham = build_hamiltonian(cfg)
    spec = thermal_spectrum(ham, cfg.beta, cfg.thermo.eps_b)
    lo, hi, n = cfg.output.channel_grid_ev
    grid = np.linspace(lo, hi, int(n))
    ne, nh = count_excitation_channels(spec.solution, spec.initial, grid)
    out.csv("channels.csv", ("energy", "n_electron", "n_hole"), zip(grid, ne, nh))
    return EXIT_OK


def cmd_sample(cfg, args, out: Output) -> int:
    ham = build_hamiltonian(cfg)
    spec = thermal_spectrum(ham, cfg.beta, cfg.thermo.eps_b)
    settings = settings_of(cfg)
    for p, s in enumerate(settings):
        aw = aliased_weight(spec, s)
        if cfg.qpe.warn_alias and aw > 1e-6:
            warnings.warn(f"setting {p}: weight {aw:.2e} of excitations lies outside the grid window and aliases")
    hists = exact_histograms(spec, settings)
    if cfg.qpe.shots:
        hists = sample_all(hists, cfg.qpe.shots, out.stamp["seed"])
    hdir = out.dir / "histograms"
    hdir.mkdir(exist_ok=True)
    for (p, c), h in sorted(hists.items()):
        h.seed = out.stamp["seed"]
        h.meta = {"config_hash": out.stamp["config_hash"]}
        h.dump(hdir / h.file_name(p))
    log.info("sample: wrote %d histogram files", len(hists))
    return EXIT_OK


def load_histograms(hdir, settings, n_sorb):
    hists = {}
    missing = []
    for p in range(len(settings)):
        for c in circuits(n_sorb):
            name = Histogram(settings[p], c, {}).file_name(p)
            path = Path(hdir) / name
            if not path.exists():
                missing.append(name)
                continue
            hists[(p, c)] = Histogram.load(path)
    if missing:
        raise cfgmod.ConfigError("incomplete circuit coverage, missing: " + ", ".join(missing))
    return hists


def cmd_reconstruct(cfg, args, out: Output) -> int:
    ham = build_hamiltonian(cfg)
    settings = settings_of(cfg)
    hdir = Path(args.hist_dir) if args.hist_dir else out.dir / "histograms"
    hists = load_histograms(hdir, settings, ham.n_sorb)
    spec = None
    if cfg.qavg.gamma_source == "exact":
        spec = thermal_spectrum(ham, cfg.beta, cfg.thermo.eps_b)
        gamma = spec.gamma() / spec.retained_weight
    else:
        gamma = estimate_gamma({c: h for (p, c), h in hists.items() if p == 0}, ham.n_sorb, real=ham.is_real).gamma
    a = cfg.qavg
    problem = QavgProblem(hists, settings, gamma, {"e": tuple(a.multiplicities_e), "h": tuple(a.multiplicities_h)},
                          CostConfig(a.tau_dec_per_ev, a.weight_mode), schedule_of(cfg), ranges_of(cfg), a.spin_block)
    rec = optimize(problem, out.stamp["seed"], args.threads)
    rec.seed, rec.config_hash = out.stamp["seed"], out.stamp["config_hash"]
    rec.dump(out.dir / "reconstruction.json")
    n, w = matsubara_frequencies(cfg.beta, cfg.output.n_matsu_out)
    z = 1j * w
    g = rec.evaluate(z)
    out.csv("g_rec.csv", GF_HEADER, gf_rows(z, g))
    spec = spec or thermal_spectrum(ham, cfg.beta, cfg.thermo.eps_b)
    gx = lehmann_gf(spec, z) / spec.retained_weight
    tr, trx = np.einsum("zii->z", g), np.einsum("zii->z", gx)
    out.csv("trace_matsubara.csv", ("n", "omega_n", "re_tr_rec", "im_tr_rec", "re_tr_exact", "im_tr_exact"),
            zip(n, z.imag, tr.real, tr.imag, trx.real, trx.imag))
    log.info("reconstruct: cost e=%.3e h=%.3e", rec.cost["e"], rec.cost["h"])
    return EXIT_OK


def cmd_dmft(cfg, args, out: Output) -> int:
    lattice = build_lattice(cfg)
    d = cfg.dmft
    dc = DmftConfig(cfg.beta, _kanamori(cfg), d.n_bath, cfg.thermo.n_matsu, d.target_occupancy, d.mu_ev,
                    d.mixing, d.tol_ev, d.max_iter, d.n_metric, d.diagonal_bath, d.n_fit_starts, out.stamp["seed"])
    if d.solver == "fci":
        solver = FciSolver(cfg.beta, cfg.thermo.eps_b)
    else:
        a, q = cfg.qavg, cfg.qpe
        solver = QavgSolver(cfg.beta, {"e": tuple(a.multiplicities_e), "h": tuple(a.multiplicities_h)},
                            cfg.thermo.eps_b, q.t0_per_ev, q.e_orig_ev, q.n_qval, q.n_setting, q.shots,
                            CostConfig(a.tau_dec_per_ev, a.weight_mode), schedule_of(cfg), ranges_of(cfg),
                            a.spin_block, out.stamp["seed"], args.threads)
    res = run_dmft(lattice, dc, solver, out.dir / "iterations", resume=args.resume, stamp=out.stamp,
                   keep_results=True)
    st = res.final
    w = matsubara(cfg.beta, cfg.thermo.n_matsu)
    write_matrix_csv(out.dir / "sigma_final.csv", w, st.sigma,
                     "# " + " ".join(f"{k}={v}" for k, v in out.stamp.items()))
    nm = min(cfg.output.n_matsu_out, len(w) - 1)
    tr = np.einsum("zii->z", st.g_loc[: nm + 1]) if st.g_loc is not None else np.zeros(0)
    out.csv("trace_gloc.csv", ("n", "omega_n", "re_tr", "im_tr"), zip(range(nm + 1), w[: nm + 1], tr.real, tr.imag))
    if res.solver_results:
        omega = omega_grid(cfg)
        delta = cfg.output.dos_delta_ev
        sig_r = real_axis_self_energy(lattice, st, res.solver_results[-1], omega, delta)
        g_loc_r = lattice.local_gf_corr(omega + 1j * delta, st.mu, sig_r)
        rho = -np.einsum("zii->z", g_loc_r).imag / np.pi
        out.csv("dos_local.csv", ("omega", "rho"), zip(omega, rho))
        a_k = momentum_resolved_dos(lattice, st, res.solver_results[-1], omega, delta)
        rows = ((omega[i], k, a_k[k, i]) for i in range(len(omega)) for k in range(a_k.shape[0]))
        out.csv("dos_k.csv", ("omega", "k", "intensity"), rows)
    out.json("summary.json", {"converged": res.converged, "iterations": st.iteration + 1, "mu": st.mu,
                              "metric_history": st.history, "solver": d.solver})
    if not res.converged:
        log.warning("dmft: not converged after %d iterations (metric %.3e)", st.iteration + 1, st.metric)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sample": cmd_sample,
    "reconstruct": cmd_reconstruct,
    "dmft": cmd_dmft,
    "channels": cmd_channels,
}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="YAML run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="overrides the config seed")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default: out)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker processes")
    p = argparse.ArgumentParser(prog="qavg", parents=[common],
                                description="Exact and reconstructed Green's functions for impurity models.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "reconstruct":
            sp.add_argument("--hist-dir", default=None, help="histogram directory (default: OUT/histograms)")
        if name == "dmft":
            sp.add_argument("--resume", action="store_true", help="continue from the last saved iteration")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    for k, v in (("config", None), ("seed", None), ("out_dir", "out"), ("threads", 1)):
        if not hasattr(args, k):
            setattr(args, k, v)
    for k, v in (("hist_dir", None), ("resume", False)):
        if not hasattr(args, k):
            setattr(args, k, v)
    try:
        if args.config is None:
            raise cfgmod.ConfigError("--config is required")
        cfg = cfgmod.load(args.config)
        seed = args.seed if args.seed is not None else cfg.seed
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2**63))
        out = Output(args.out_dir, cfg, int(seed))
        return COMMANDS[args.command](cfg, args, out)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (np.linalg.LinAlgError, ZeroDivisionError, FloatingPointError, ValueError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
