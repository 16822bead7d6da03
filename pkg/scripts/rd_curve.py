"""Bhattacharyya rate-distortion curve of a binary symmetric channel, solver vs closed form."""

import argparse

import numpy as np

from mixcomp import classical as cs
from mixcomp import info_measures as im


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--w", type=float, default=0.1)
    ap.add_argument("--prior", type=float, default=0.5, help="P(0)")
    ap.add_argument("--points", type=int, default=20)
    args = ap.parse_args()

    p = np.array([args.prior, 1 - args.prior])
    spec = cs.bhattacharyya_distortion([[1 - args.w, args.w], [args.w, 1 - args.w]])
    d = spec.matrix[0, 1]
    # beyond the smaller prior mass (scaled by d) the rate is zero
    grid = np.linspace(0, min(p) * d, args.points)
    curve = cs.rate_distortion_fn(p, spec, grid)
    print("D,R,closed_form,iterations,gap")
    for x, r, it, g in zip(curve.D, curve.R, curve.iterations, curve.gap):
        ref = max(0.0, im.entropy(p) - im.binary_entropy(min(0.5, x / d)))
        print(f"{x:.6f},{r:.8f},{ref:.8f},{it},{g:.2e}")


if __name__ == "__main__":
    main()
