#!/usr/bin/env python3
"""Desk-scale solver comparison on seeded sparse-PCA instances.

Runs the plain and accelerated envelope solvers against FBS, DCA and DRS on
n=100 instances for seeds 0..4 (configurable) and prints the mean iteration
and proximal/gradient call counts per solver. The plain envelope solver is
capped at 1000 iterations; the baselines get a generous budget.
"""

import argparse

import numpy as np

import dcprox as dp


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-6)
    args = ap.parse_args()

    rows = {name: [] for name in ("dce", "dce-lbfgs", "fbs", "dca", "drs")}
    for seed in range(args.seeds):
        spca, inst = dp.make_spca(args.n, seed=seed)
        gamma = 0.9 / spca.lam_max
        cfg = dp.TwoProxConfig(gamma=gamma, lam=1.0, tol=args.tol, max_iter=1000)
        runs = {
            "dce": dp.run(inst, cfg, spca.s0),
            "dce-lbfgs": dp.run_lbfgs(inst, cfg, spca.s0),
            "fbs": dp.fbs_run(inst, gamma, args.tol, 20000, spca.s0),
            "dca": dp.dca_run(inst, gamma, args.tol, 20000, spca.s0),
            "drs": dp.drs_run(inst, 0.45 / spca.lam_max, args.tol, 20000, spca.s0),
        }
        for name, rep in runs.items():
            rows[name].append(rep)
        counts = ", ".join(f"{k}={r.iterations}{'' if r.converged else '*'}"
                           for k, r in runs.items())
        print(f"seed {seed}: {counts}   (* hit the iteration cap)")

    print(f"\nmeans over {args.seeds} seeds at n={args.n}, tol={args.tol:g}:")
    print(f"{'solver':>10} {'iters':>8} {'prox_h':>8} {'prox_g':>8} {'grad_h':>8}")
    for name, reps in rows.items():
        iters = np.mean([r.iterations for r in reps])
        ph = np.mean([r.counts()[0] for r in reps])
        pg = np.mean([r.counts()[1] for r in reps])
        gh = np.mean([r.counts()[2] for r in reps])
        print(f"{name:>10} {iters:8.1f} {ph:8.1f} {pg:8.1f} {gh:8.1f}")


if __name__ == "__main__":
    main()
