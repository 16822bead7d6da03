"""Mean fidelity of random codebooks against block length, below and above R(D)."""

import argparse

from mixcomp import classical as cs
from mixcomp.ensemble import builtin_two_coins


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--w", type=float, default=0.1)
    ap.add_argument("--prior", type=float, default=0.8)
    ap.add_argument("--rates", type=float, nargs="+", default=[0.5, 0.9])
    ap.add_argument("--n", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=10)
    args = ap.parse_args()

    spec = cs.bhattacharyya_distortion(builtin_two_coins(args.w).W)
    p = [args.prior, 1 - args.prior]
    print("rate,n,mode,codebook_size,mean_distortion,mean_fidelity")
    for r in args.rates:
        for n in args.n:
            res = cs.random_code_experiment(p, spec, r, n, args.trials, args.seed)
            print(f"{r},{n},{res.mode},{res.codebook_size},{res.mean_distortion:.6f},{res.mean_fidelity:.6f}")


if __name__ == "__main__":
    main()
