"""Accumulated electron and hole channel counts for a Kanamori impurity model.

Usage: python scripts/channel_counts.py [--n-orb 2] [--n-bath 2] [--out channels.csv]
"""
import argparse
import csv

import numpy as np

from qavg.eigen import count_excitation_channels
from qavg.greens import thermal_spectrum
from qavg.hamiltonian import Kanamori, build_aim


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n-orb", type=int, default=2)
    p.add_argument("--n-bath", type=int, default=2)
    p.add_argument("--U", type=float, default=2.0)
    p.add_argument("--J", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=40.0)
    p.add_argument("--eps-b", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="channels.csv")
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    k = Kanamori(U=args.U, U0=args.U - 2 * args.J, J=args.J)
    h = np.diag(rng.uniform(-1.5, -0.5, args.n_orb))
    eb = np.linspace(-1.0, 1.0, args.n_bath)
    V = rng.uniform(0.2, 0.6, size=(args.n_bath, args.n_orb))
    ham = build_aim(h, k, eb, V)
    spec = thermal_spectrum(ham, args.beta, args.eps_b)
    grid = np.linspace(-6, 6, 1201)
    ne, nh = count_excitation_channels(spec.solution, spec.initial, grid)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("energy", "n_electron", "n_hole"))
        w.writerows(zip(grid, ne, nh))
    print(f"n_sorb={ham.n_sorb}  electron channels={ne[-1]}  hole channels={nh[0]}  -> {args.out}")


if __name__ == "__main__":
    main()
