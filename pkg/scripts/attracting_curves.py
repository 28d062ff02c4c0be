"""BL distance of f^t nu to the circle measure for random densities on the
annulus under the doubling-contraction map."""

import argparse

import numpy as np

from ergosim.classify import attracting_test, write_series
from ergosim.measure import DensitySpec, grid_measure
from ergosim.rng import generator
from ergosim.systems import get_system


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--densities", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="attracting")
    args = p.parse_args()

    sys_ = get_system("doubling_contract")
    ref = grid_measure(sys_.measure, 20_000)
    rng = generator(args.seed)
    t_grid = np.arange(0, 41, 2)
    for j in range(args.densities):
        k, a, b, ph = int(rng.integers(1, 4)), rng.uniform(0.2, 0.9), rng.uniform(-1.5, 1.5), rng.uniform()
        dens = lambda x, k=k, a=a, b=b, ph=ph: 1 + a * np.cos(2 * np.pi * (k * x[:, 0] + ph)) + b * (x[:, 1] - 1)
        init = DensitySpec(sys_.space, (0.0, 0.5), (1.0, 1.5), density=dens, density_max=1 + a + abs(b) / 2)
        rec = attracting_test(sys_, init, ref, t_grid, args.n, seed=args.seed + j)
        write_series(rec, f"{args.out}_{j}.csv")
        print(f"density {j}: BL at t=0 {rec.values[0]:.3f}, t=20 {rec.values[10]:.4f}, t=40 {rec.values[-1]:.4f}")


if __name__ == "__main__":
    main()
