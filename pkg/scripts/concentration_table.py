"""Concentration profile of the counterexample's time averages against the
closed-form bound, over several radii eps/M and offsets y0."""

import argparse

from ergosim import counterexample as cx
from ergosim.classify import concentration_bound, concentration_profile
from ergosim.systems import get_system


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--quadrature-n", type=int, default=100_000)
    p.add_argument("--T", default="1e2,1e3,1e4,1e5")
    args = p.parse_args()

    base = get_system("linear_torus")
    M = cx.field_bound(base)
    T = [float(v) for v in args.T.split(",")]
    print(f"M = {M:.4f}")
    print("y0     eps/M  T        profile   bound")
    for y0 in (0.05, 0.2, 0.5):
        params = cx.CounterexampleParams(y0, base)
        for r in (0.05, 0.1, 0.3, 1.0):
            prof = concentration_profile(params, r * M, T, args.quadrature_n).values
            bound = concentration_bound(params, r * M, T, M=M)
            for t, a, b in zip(T, prof, bound):
                print(f"{y0:<6} {r:<6} {t:<8.0e} {a:<9.5f} {b:.5f}")


if __name__ == "__main__":
    main()
