"""Measure of the bad slope set as rho shrinks, on the full window and on I_A."""

import argparse

from cantorsum.decomposition import ProductSystem
from cantorsum.export import write_csv
from cantorsum.ifs import preset
from cantorsum.projection import good_slopes


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--first", default="cantor:4")
    ap.add_argument("--second", default="cantor:5")
    ap.add_argument("--eta", type=float, default=0.05)
    ap.add_argument("--A", type=float, default=2.0)
    ap.add_argument("--ks", default="6,7,8,9,10,11,12")
    ap.add_argument("--out", default="out/good_slopes.csv")
    args = ap.parse_args()
    sys_ = ProductSystem(preset(args.first), preset(args.second))
    rows = []
    for k in map(int, args.ks.split(",")):
        rho = 2.0 ** -k
        full = good_slopes(sys_, rho, args.eta, args.A)
        ia = good_slopes(sys_, rho, args.eta, args.A, domain="IA")
        rows.append((k, full.threshold, full.complement_measure, ia.complement_measure, full.bound))
        print(f"2^-{k:<3d} threshold {full.threshold:10.1f}  bad measure {full.complement_measure:.4f}"
              f" (I_A {ia.complement_measure:.4f})  rho^eta {full.bound:.3f}")
    write_csv(args.out, ["k", "threshold", "bad_full", "bad_IA", "rho_eta"], rows)


if __name__ == "__main__":
    main()
