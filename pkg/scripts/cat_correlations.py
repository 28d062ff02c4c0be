"""Character correlations of the cat map against their MC standard errors."""

import argparse

import numpy as np

from ergosim.classify import classical_correlation
from ergosim.measure import TestFunction, sample_density
from ergosim.systems import get_system


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--t-max", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    cat = get_system("cat")
    mu = sample_density(cat.measure, args.n, args.seed)
    g1 = TestFunction(lambda x: np.cos(2 * np.pi * x[:, 0]), 1.0, 2 * np.pi)
    g2 = TestFunction(lambda x: np.cos(2 * np.pi * x[:, 1]), 1.0, 2 * np.pi)
    same = classical_correlation(cat, mu, g1, g1, np.arange(args.t_max + 1))
    cross = classical_correlation(cat, mu, g1, g2, np.arange(args.t_max + 1))
    print(" t   C(cos x1, cos x1)   C(cos x1, cos x2)   stderr")
    for t, a, b, s in zip(same.times, same.values, cross.values, cross.stderr):
        print(f"{t:2.0f}   {a:+.5f}            {b:+.5f}            {s:.5f}")


if __name__ == "__main__":
    main()
