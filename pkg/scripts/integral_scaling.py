"""Growth of the integral of N(lam) over [-A, A] against the decomposition size."""

import argparse

from cantorsum.decomposition import ProductSystem, loglog_fit, product_decomposition
from cantorsum.export import write_csv
from cantorsum.ifs import preset
from cantorsum.projection import integral_claim_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--first", default="cantor:4")
    ap.add_argument("--second", default="cantor:5")
    ap.add_argument("--A", type=float, default=2.0)
    ap.add_argument("--kmin", type=int, default=6)
    ap.add_argument("--kmax", type=int, default=15)
    ap.add_argument("--window", type=int, default=4)
    ap.add_argument("--out", default="out/integral_scaling.csv")
    args = ap.parse_args()
    sys_ = ProductSystem(preset(args.first), preset(args.second))
    ks = list(range(args.kmin, args.kmax + 1))
    rows = []
    for k in ks:
        rho = 2.0 ** -k
        c = integral_claim_check(sys_, rho, args.A, method="exact")
        n = len(product_decomposition(sys_, rho))
        rows.append((k, rho, n, c.integral, c.ratio))
        print(f"rho = 2^-{k:<3d} #Lambda = {n:<7d} integral = {c.integral:12.2f}  "
              f"rho^d integral = {c.ratio:.3f}")
    print(f"d = {sys_.d:.5f}; sliding {args.window}-scale slopes:")
    for i in range(len(rows) - args.window + 1):
        part = rows[i:i + args.window]
        s = loglog_fit([r[1] for r in part], [r[3] for r in part])[0]
        print(f"  2^-{part[0][0]}..2^-{part[-1][0]}: {s:.4f}")
    write_csv(args.out, ["k", "rho", "n_rect", "integral", "ratio"], rows)


if __name__ == "__main__":
    main()
