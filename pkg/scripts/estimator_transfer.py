"""Steady-state gain and phase from the true road input to its estimate, quarter-car, vertical channel.

The plant is discretised exactly for an input interpolated linearly between
samples; the filter runs at its Riccati steady state. Also prints the
eigenvalue magnitudes of the steady-state error map (I - K H) F.

Usage: python3 scripts/estimator_transfer.py [--dt 0.02] [--ratio 1e9] [--noise 0.05]
"""
import argparse
import sys

import numpy as np
from scipy import linalg

from roadrough.kalman import KfConfig, steady_state_prior
from roadrough.models import build_qc, discretize, golden_car_params


def transfer(freqs, dt, cfg):
    ss = build_qc(golden_car_params())
    d = discretize(ss, dt)
    P = steady_state_prior(d, cfg)
    K = P @ d.H.T @ np.linalg.inv(d.H @ P @ d.H.T + cfg.R)
    E = linalg.expm(np.block([[ss.A * dt, ss.B * dt, np.zeros((4, 1))],
                              [np.zeros((1, 5)), np.eye(1)], [np.zeros((1, 6))]]))
    Phi, G1, G2 = E[:4, :4], E[:4, 4:5], E[:4, 5:6]
    Af = (np.eye(4) - K @ d.H) @ d.F
    out = []
    for f in freqs:
        z = np.exp(2j * np.pi * f * dt)
        Y = (d.H @ np.linalg.solve(z * np.eye(4) - Phi, (G1 - G2) + G2 * z))[0, 0]
        Xf = np.linalg.solve(z * np.eye(4) - Af, K * z) * Y
        out.append((cfg.Q @ d.G.T @ np.linalg.solve(P, Xf * z - d.F @ Xf))[0, 0])
    return np.array(out), np.abs(np.linalg.eigvals(Af))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=0.02)
    ap.add_argument("--ratio", type=float, default=1e9)
    ap.add_argument("--noise", type=float, default=0.05)
    args = ap.parse_args()
    cfg = KfConfig.from_ratio(1, 1, qr_ratio=args.ratio, noise_std=args.noise)
    f = np.geomspace(0.1, 0.5 / args.dt, 60)
    H, lam = transfer(f, args.dt, cfg)
    print("freq_hz,gain,phase_deg")
    for fi, h in zip(f, H):
        print(f"{fi:.4g},{abs(h):.5f},{np.angle(h, deg=True):.3f}")
    print("# error-map |eigenvalues|: " + " ".join(f"{x:.7f}" for x in np.sort(lam)), file=sys.stderr)


if __name__ == "__main__":
    main()
