"""Bowen-ball ratio table for the doubling map (Lebesgue on both sides)."""

import argparse

from ergosim.coarse import cehyp_scan, write_scan
from ergosim.systems import get_system


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--delta", type=float, default=0.02)
    p.add_argument("--tau-max", type=int, default=10)
    p.add_argument("--n-x", type=int, default=8)
    p.add_argument("--n-mc", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="ratio_scan.csv")
    args = p.parse_args()

    sys_ = get_system("doubling")
    rows = cehyp_scan(sys_, sys_.measure, sys_.measure, sys_.attractor, args.delta, range(1, args.tau_max + 1),
                      args.n_x, args.n_mc, args.seed, workers=args.workers)
    write_scan(rows, args.out)
    for r in rows:
        print(f"tau={r.tau:4.0f}  min ratio {r.min_ratio:.4f}  zero denominators {r.n_zero_denominators}")


if __name__ == "__main__":
    main()
