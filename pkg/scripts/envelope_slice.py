#!/usr/bin/env python3
"""Dump a 1-D slice of the smoothed objective for plotting.

Walks env(s0 + t*d) along a random direction d through a sparse-PCA
instance and writes t, envelope value, residual, and the two objective
brackets to a CSV. Useful for eyeballing the smoothness of the surrogate
against the kinks of the underlying objective.
"""

import argparse
import csv

import numpy as np

import dcprox as dp


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--points", type=int, default=401)
    ap.add_argument("--span", type=float, default=3.0)
    ap.add_argument("--out", default="envelope_slice.csv")
    args = ap.parse_args()

    spca, inst = dp.make_spca(args.n, seed=args.seed)
    gamma = 0.9 / spca.lam_max
    rng = np.random.default_rng(args.seed + 1)
    direction = rng.standard_normal(args.n)
    direction /= np.linalg.norm(direction)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "env", "residual", "phi_lower", "phi_upper"])
        for t in np.linspace(-args.span, args.span, args.points):
            s = spca.s0 + t * direction
            ev = dp.dce_eval(inst, gamma, s)
            lower, upper = dp.sandwich_bounds(inst, gamma, s)
            writer.writerow([repr(float(t)), repr(ev.env), repr(ev.residual),
                             repr(lower), repr(upper)])
    print(f"wrote {args.points} samples to {args.out} "
          f"(n={args.n}, seed={args.seed}, gamma={gamma:.4g})")


if __name__ == "__main__":
    main()
