"""Print the road-to-rattle-velocity gain of the Golden car and the identified car as CSV.

Usage: python3 scripts/gain_curve.py [--fmin 0.1] [--fmax 50] [--n 400]
"""
import argparse
import sys

import numpy as np

from roadrough.models import golden_car_params, identified_car_params, iri_gain


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fmin", type=float, default=0.1)
    ap.add_argument("--fmax", type=float, default=50.0)
    ap.add_argument("--n", type=int, default=400)
    args = ap.parse_args()
    f = np.geomspace(args.fmin, args.fmax, args.n)
    golden = iri_gain(f, golden_car_params())
    car = iri_gain(f, identified_car_params())
    print("freq_hz,golden_gain,identified_gain")
    for row in zip(f, golden, car):
        print(",".join(f"{x:.6g}" for x in row))
    k = int(np.argmax(golden))
    print(f"# golden peak {golden[k]:.3f} at {f[k]:.2f} Hz", file=sys.stderr)


if __name__ == "__main__":
    main()
