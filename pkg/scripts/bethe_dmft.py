"""Bethe-lattice DMFT with the exact solver, then a few QAVG iterations for comparison.

Usage: python scripts/bethe_dmft.py [--U 2.0] [--qavg-iter 3] [--n-runs 8]
"""
import argparse
import os
import time

import numpy as np

from qavg.dmft import DmftConfig, FciSolver, QavgSolver, local_gf, matsubara, run_dmft
from qavg.engine import MetropolisSchedule, SearchRanges
from qavg.hamiltonian import Kanamori
from qavg.lattice import BetheLattice


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--U", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=40.0)
    p.add_argument("--qavg-iter", type=int, default=3, help="0 skips the QAVG run")
    p.add_argument("--n-runs", type=int, default=8)
    p.add_argument("--n-steps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    args = p.parse_args()

    lat = BetheLattice(2.0, 1)
    iw = 1j * matsubara(args.beta, 20)
    t = time.perf_counter()
    cfg = DmftConfig(args.beta, Kanamori(U=args.U), n_bath=3, mu=args.U / 2, max_iter=10)
    fci = run_dmft(lat, cfg, FciSolver(args.beta))
    for s in fci.states:
        print(f"fci  iter {s.iteration:2d}  metric {s.metric:.3e}")
    print(f"fci converged={fci.converged} in {time.perf_counter() - t:.0f} s")
    if not args.qavg_iter:
        return
    tr_fci = np.einsum("zii->z", local_gf(lat, fci.final.mu, fci.final.sigma[:21], iw))

    mult = (1,) * 6
    solver = QavgSolver(args.beta, {"e": mult, "h": mult}, ranges=SearchRanges((-0.5, 5.5), (0.0, 1 / 3)),
                        schedule=MetropolisSchedule(n_steps=args.n_steps, n_runs=args.n_runs, tau_end=1e5),
                        seed=args.seed, threads=args.threads)
    t = time.perf_counter()
    qcfg = DmftConfig(args.beta, Kanamori(U=args.U), n_bath=3, mu=args.U / 2, max_iter=args.qavg_iter)
    res = run_dmft(lat, qcfg, solver)
    for s in res.states:
        tr = np.einsum("zii->z", local_gf(lat, s.mu, s.sigma[:21], iw))
        print(f"qavg iter {s.iteration:2d}  metric {s.metric:.3e}  "
              f"max |tr G_loc - tr G_fci| (n<=20) {np.abs(tr - tr_fci).max():.3f}")
    print(f"qavg done in {time.perf_counter() - t:.0f} s")


if __name__ == "__main__":
    main()
