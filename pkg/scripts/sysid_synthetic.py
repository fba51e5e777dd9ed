"""Recover half-car suspension parameters from synthetic vertical and lateral responses.

The measured response is produced by the identification model itself at the
identified-car parameters, scaled by the sensor gain, plus white noise given
as a fraction of each channel's RMS.

Usage: python3 scripts/sysid_synthetic.py [--noise 0 0.01 0.05] [--starts 5] [--length 200]
"""
import argparse

import numpy as np

from roadrough.models import IDENTIFIED_GAIN, identified_car_params
from roadrough.signals import TimeSeries
from roadrough.simulate import SpeedProfile, drive, synth_profile
from roadrough.sysid import BETA_NAMES, SysIdProblem, identify, simulate_response


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.01, 0.05])
    ap.add_argument("--starts", type=int, default=5)
    ap.add_argument("--length", type=float, default=200.0)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    par = identified_car_params()
    truth = np.array([par.K_s, par.C_s, par.K_t, par.I_s])
    v = 55 / 3.6
    tr = drive(synth_profile("B", args.length + 20, seed=args.seed), SpeedProfile.constant(v), par, "hc",
               duration=args.length / v)

    def problem(y):
        return SysIdProblem(TimeSeries(0.0, tr.dt, y), tr.true_inputs, par.m_s, par.m_u, par.l)

    clean = IDENTIFIED_GAIN * simulate_response(truth, problem(np.zeros_like(tr.true_inputs))).values
    rng = np.random.default_rng(args.seed)
    print("noise_fraction," + ",".join(f"{n}_rel_err" for n in BETA_NAMES) + ",mu,cost_ratio,converged")
    for frac in args.noise:
        y = clean + frac * clean.std(axis=0) * rng.standard_normal(clean.shape)
        res = identify(problem(y), n_starts=args.starts)
        err = res.beta / truth - 1
        print(f"{frac:g}," + ",".join(f"{e:+.3e}" for e in err)
              + f",{res.mu:.4f},{res.cost / res.initial_cost:.2e},{int(res.converged)}")


if __name__ == "__main__":
    main()
