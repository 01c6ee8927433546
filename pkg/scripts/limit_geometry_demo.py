"""Sullivan limits of the Gauss pair along a few tails, with C1 decay rates."""

import argparse

import numpy as np

from cantorsum.export import write_limit
from cantorsum.ifs import preset
from cantorsum.limit_geometry import Tail, decay_ratios, sullivan_limit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--system", default="gauss:1,3")
    ap.add_argument("--tails", default="(1);(2);(1.2);2(1)")
    ap.add_argument("--out", default="out/limit.csv")
    args = ap.parse_args()
    ifs = preset(args.system)
    for spec in args.tails.split(";"):
        L = sullivan_limit(ifs, Tail.parse(spec), tol=1e-12)
        r = decay_ratios(L.distances)
        rate = float(np.median(r[3:])) if len(r) > 3 else float("nan")
        print(f"tail {spec:>6}: k = {L.k:<3d} converged {L.converged}  median decay {rate:.4f}")
        write_limit(args.out, L)


if __name__ == "__main__":
    main()
