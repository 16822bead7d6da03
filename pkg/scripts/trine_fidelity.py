"""Exact expected fidelity of the trine ensemble against rate, for small n."""

import argparse

import numpy as np

from mixcomp import info_measures as im
from mixcomp import protocol as pr
from mixcomp.ensemble import builtin_trine


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--rates", type=float, nargs="+", default=list(np.round(np.arange(0.1, 1.3, 0.1), 2)))
    args = ap.parse_args()

    e = builtin_trine()
    print(f"# I(P,W) = {im.mutual_information(e.P, e.W):.6f}, chi = {im.holevo_chi(e):.6f}")
    print("n,rate,list_size,fidelity,bound,p_e_max")
    for n in args.n:
        for r in args.rates:
            rep = pr.expected_fidelity_exact(e, pr.ProtocolConfig(n=n, rate=float(r)))
            cfg = pr.ProtocolConfig(n=n, rate=float(r))
            print(f"{n},{r},{cfg.N_l},{rep.fidelity:.10f},{rep.bound:.6f},{rep.p_e_max:.6g}")


if __name__ == "__main__":
    main()
