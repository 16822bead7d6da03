"""Exact commuting-path fidelity of the two-coins source across n and R - I."""

import argparse

from mixcomp import info_measures as im
from mixcomp import protocol as pr
from mixcomp.ensemble import builtin_two_coins


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--w", type=float, default=0.1)
    ap.add_argument("--n", type=int, nargs="+", default=[25, 50, 100, 200, 400])
    ap.add_argument("--offsets", type=float, nargs="+", default=[-0.2, -0.1, 0.0, 0.1, 0.2])
    args = ap.parse_args()

    e = builtin_two_coins(args.w)
    mi = im.mutual_information(e.P, e.W)
    print(f"# w = {args.w}, I(P,W) = {mi:.6f}")
    print("n,rate_minus_I,fidelity,p_e_max")
    for n in args.n:
        for off in args.offsets:
            rep = pr.expected_fidelity_exact(e, pr.ProtocolConfig(n=n, rate=mi + off))
            print(f"{n},{off:+.2f},{rep.fidelity:.10f},{rep.p_e_max:.4g}")


if __name__ == "__main__":
    main()
