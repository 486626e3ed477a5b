"""Plant-and-recover: sample QPE histograms of a small impurity model and fit them.

Usage: python scripts/one_shot_qavg.py [--shots 0] [--n-runs 8] [--n-steps 10000]
"""
import argparse
import os

import numpy as np

from qavg.engine import MetropolisSchedule, QavgProblem, optimize
from qavg.greens import lehmann_gf, matsubara_frequencies, thermal_spectrum
from qavg.hamiltonian import Kanamori, build_aim
from qavg.qpe import estimate_gamma, exact_histograms, sample_all, shifted_settings


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shots", type=int, default=0, help="0 uses exact histograms")
    p.add_argument("--n-runs", type=int, default=8)
    p.add_argument("--n-steps", type=int, default=10_000)
    p.add_argument("--beta", type=float, default=40.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    args = p.parse_args()

    ham = build_aim([[-1.0]], Kanamori(U=2.0), [0.0], [[0.6]])
    spec = thermal_spectrum(ham, args.beta, 1e-4)
    settings = shifted_settings()
    hists = exact_histograms(spec, settings)
    if args.shots:
        hists = sample_all(hists, args.shots, args.seed)
    gamma = estimate_gamma({c: h for (i, c), h in hists.items() if i == 0}, spec.n_sorb, real=True).gamma
    problem = QavgProblem(hists, settings, gamma, {"e": (1, 1, 1), "h": (1, 1, 1)},
                          schedule=MetropolisSchedule(n_steps=args.n_steps, n_runs=args.n_runs))
    rec = optimize(problem, seed=args.seed, threads=args.threads)

    _, w = matsubara_frequencies(args.beta, 20)
    tr = np.einsum("zii->z", rec.evaluate(1j * w))
    tr_ex = np.einsum("zii->z", lehmann_gf(spec, 1j * w)) / spec.retained_weight
    print("cost", {k: f"{v:.2e}" for k, v in rec.cost.items()})
    print(f"max |tr G_rec - tr G_exact| over n=0..20: {np.abs(tr - tr_ex).max():.3e}")


if __name__ == "__main__":
    main()
