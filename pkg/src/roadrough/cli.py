"""Command-line entry point: simulate, estimate, iri, sysid, match, eval.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from . import io as rio
from .errors import NumericalError, ValidationError
from .evaluation import HIST_COLUMNS, REPORT_COLUMNS, evaluate, fit_calibration, report_rows
from .geomatch import MatchConfig, match
from .iri import IriConfig, cumulative_distance, iri_from_estimates, iri_from_profile
from .kalman import KfConfig, run_filter
from .signals import STANDARD_GRAVITY, TimeSeries, highpass, lowpass, remove_gravity
from .simulate import SpeedProfile, drive, synth_profile

DEFAULT_LPF = {"vertical": 13.0, "lateral": 11.0}
DEFAULT_HPF = {"vertical": None, "lateral": 0.5}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _floats(text, n=None, sep=","):
    try:
        vals = [float(x) for x in text.split(sep)]
    except ValueError:
        raise ValidationError(f"expected numbers separated by {sep!r}, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ValidationError(f"expected {n} values, got {text!r}")
    return vals


def parse_speed(text: str) -> SpeedProfile:
    """``80`` (constant km/h) or ``55@30,105@30`` (km/h held for seconds, 1 s ramps)."""
    if "@" not in text:
        return SpeedProfile.constant(_floats(text, 1)[0] / 3.6)
    levels, durations = [], []
    for part in text.split(","):
        kmh, _, dur = part.partition("@")
        a, b = _floats(kmh, 1)[0], _floats(dur, 1)[0]
        levels.append(a / 3.6)
        durations.append(b)
    return SpeedProfile.piecewise(levels, durations)


def _optional_freq(text):
    if text is None:
        return None
    if text.lower() in ("none", "off", "0"):
        return 0.0
    return _floats(text, 1)[0]


def load_profile(spec: str, seed, origin=None):
    """A profile CSV or ``synth:CLASS:LENGTH``."""
    if spec.startswith("synth:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValidationError(f"synthetic profile must be synth:CLASS:LENGTH, got {spec!r}")
        return synth_profile(parts[1], _floats(parts[2], 1)[0], seed=seed, origin=origin), 0.0
    return rio.read_profile(spec)


def cmd_simulate(args):
    origin = _floats(args.origin, 2) if args.origin else None
    profile, station0 = load_profile(args.profile, args.seed, origin)
    params = rio.read_params(args.params)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tr = drive(profile, parse_speed(args.speed), params, args.model, dt=args.dt,
                   noise_std=args.noise, seed=args.seed, duration=args.duration)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    n = len(tr)
    rio.write_drive(args.out, rio.DriveData(
        tr.t, tr.vertical_acc + STANDARD_GRAVITY, tr.lateral_acc, tr.speed, tr.lat, tr.lon))
    if args.truth_out:
        rio.write_profile(args.truth_out, profile, station0)
    print(f"wrote {n} samples to {args.out}" + (" (truncated)" if tr.truncated else ""))


def preprocess(d: rio.DriveData, channels: str, lpf=None, hpf=None) -> np.ndarray:
    """Gravity removal and filtering; returns the measurement matrix for the channels."""
    dt = d.dt
    cols = []
    if channels in ("vertical", "both"):
        ts = remove_gravity(TimeSeries(d.t[0], dt, d.az))
        cols.append(_filter(ts, "vertical", lpf, hpf).values)
    if channels in ("lateral", "both"):
        cols.append(_filter(TimeSeries(d.t[0], dt, d.ax), "lateral", lpf, hpf).values)
    return np.column_stack(cols)


def _filter(ts, kind, lpf, hpf):
    lo = DEFAULT_LPF[kind] if lpf is None else lpf
    hi = DEFAULT_HPF[kind] if hpf is None else hpf
    if lo:
        ts = lowpass(ts, lo)
    if hi:
        ts = highpass(ts, hi)
    return ts


def cmd_estimate(args):
    d = rio.ingest_drive(args.drive)
    if d.gaps:
        line, gap = d.gaps[0]
        print(f"warning: {len(d.gaps)} sample interval(s) off nominal, first at line {line} (dt={gap:g} s)",
              file=sys.stderr)
    if len(d) < 2:
        raise ValidationError(f"{args.drive}: need at least 2 samples")
    params = rio.read_params(args.params)
    y = preprocess(d, args.channels, _optional_freq(args.lpf), _optional_freq(args.hpf))
    model = "qc" if args.channels == "vertical" else "hc"
    m = 1 if model == "qc" else 2
    cfg = KfConfig.from_ratio(m, y.shape[1], args.qr_ratio, args.noise_std)
    est = run_filter(y, d.dt, params, model, args.channels, cfg, t0=d.t[0])
    segs = iri_from_estimates(est, d.t, d.v, IriConfig(args.L, args.S), args.calibration,
                              lat=d.lat, lon=d.lon)
    rio.write_segments(args.out, segs)
    print(f"wrote {len(segs)} segments to {args.out}")


def cmd_iri(args):
    profile, station0 = rio.read_profile(args.profile)
    segs = iri_from_profile(profile, IriConfig(args.L, args.S), station0)
    rio.write_segments(args.out, segs)
    print(f"wrote {len(segs)} segments to {args.out}")


def _road_inputs(d: rio.DriveData, profile, station0, how: str):
    """Profile elevations under the vehicle at each drive sample; returns (sample mask, inputs)."""
    left, right = profile.tracks()
    if how == "station":
        s = cumulative_distance(d.t, d.v)
        ok = s <= profile.length
        u = np.column_stack([np.interp(s, profile.stations, left), np.interp(s, profile.stations, right)])
        return ok, u
    if not how.startswith("geo"):
        raise ValidationError(f"--match must be 'station' or 'geo[:DMAX:PHIMAX]', got {how!r}")
    if d.lat is None or not profile.has_geotags:
        raise ValidationError("geo matching needs positions in both the drive and the profile")
    parts = how.split(":")[1:]
    cfg = MatchConfig(*(float(p) for p in parts)) if parts else MatchConfig()
    res = match(d.lat, d.lon, profile.lat, profile.lon, cfg)
    idx = np.maximum(res.ref_index, 0)
    return res.matched, np.column_stack([left[idx], right[idx]])


def _longest_run(mask):
    best, start, cur = (0, 0), None, 0
    for i, ok in enumerate(np.append(mask, False)):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    return best


def cmd_sysid(args):
    from .sysid import SysIdProblem, default_init, identify

    d = rio.ingest_drive(args.drive)
    profile, station0 = rio.read_profile(args.profile)
    base = rio.read_params(args.params)
    if base.l is None:
        raise ValidationError("parameter set must define l (half track width)")
    ok, u = _road_inputs(d, profile, station0, args.match)
    a, b = _longest_run(ok)
    if b - a < 2:
        raise ValidationError("no contiguous section of the drive is matched to the profile")
    y = preprocess(d, "both", _optional_freq(args.lpf), 0.0)[a:b]
    band = _floats(args.band, 2, ":")
    beta0, _ = default_init()
    if args.init_Is is not None:
        beta0[3] = args.init_Is
    prob = SysIdProblem(TimeSeries(d.t[a], d.dt, y), u[a:b], base.m_s, base.m_u, base.l,
                        tuple(band), args.smoothing, beta0)
    res = identify(prob, n_starts=args.starts, seed=args.seed)
    rows = [(k, v) for k, v in res.as_dict().items()]
    rows += [("m_s", base.m_s), ("m_u", base.m_u), ("l", base.l), ("n_samples", b - a)]
    rio.write_rows(args.out, ("parameter", "value"), rows)
    if args.params_out:
        rio.write_params(args.params_out, res.params(prob), {"mu": res.mu})
    print(f"cost {res.cost:.3g} (initial {res.initial_cost:.3g}), converged={res.converged}")


def cmd_match(args):
    d = rio.ingest_drive(args.imu)
    profile, station0 = rio.read_profile(args.ref)
    if d.lat is None or not profile.has_geotags:
        raise ValidationError("matching needs lat_deg/lon_deg in both files")
    res = match(d.lat, d.lon, profile.lat, profile.lon, MatchConfig(args.dmax, args.phimax))
    rows = ((i, int(j) if j >= 0 else "", res.distance[i], res.angle[i]) for i, j in enumerate(res.ref_index))
    rio.write_rows(args.out, rio.MATCH_COLUMNS, rows)
    print(f"matched {int(res.matched.sum())} of {len(res)} samples")


def cmd_eval(args):
    est = rio.read_segments(args.est)
    ref = rio.read_segments(args.ref)
    rep = evaluate(est, ref, args.alignment)
    rio.write_rows(args.out, REPORT_COLUMNS, report_rows(rep))
    if args.hist:
        rows = zip(rep.hist_edges[:-1], rep.hist_edges[1:], rep.hist_est, rep.hist_ref)
        rio.write_rows(args.hist, HIST_COLUMNS, rows)
    o = rep.overall
    msg = f"{o.n} segments, mean error {o.mean:.3f}, RMSE {o.rmse:.3f} mm/m"
    try:
        pairs = [(s.iri, r.iri) for s in est for r in ref if abs(s.start - r.start) < 1e-6]
        msg += f", fitted slope {fit_calibration(*zip(*pairs)):.3f}"
    except (ValidationError, TypeError):
        pass
    print(msg)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="roadrough", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="drive a vehicle model over a profile")
    s.add_argument("--profile", required=True, help="profile CSV or synth:CLASS:LENGTH")
    s.add_argument("--speed", default="80", help="km/h, or piecewise 55@30,105@30 (km/h@seconds)")
    s.add_argument("--params", default="audi", help="parameter file or named set (golden, audi)")
    s.add_argument("--model", choices=("qc", "hc"), default="qc")
    s.add_argument("--noise", type=float, default=0.05, help="measurement noise std (m/s^2)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dt", type=float, default=0.02)
    s.add_argument("--duration", type=float, default=None)
    s.add_argument("--origin", default=None, help="lat,lon to geotag a synthetic profile")
    s.add_argument("--truth-out", default=None, help="also write the driven profile")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate IRI segments from a drive")
    e.add_argument("--drive", required=True)
    e.add_argument("--params", default="audi")
    e.add_argument("--channels", choices=("vertical", "lateral", "both"), default="vertical")
    e.add_argument("--qr-ratio", type=float, default=1e9)
    e.add_argument("--noise-std", type=float, default=0.05, help="assumed measurement noise std")
    e.add_argument("--lpf", default=None, help="low-pass cutoff Hz, or 'none' (default 13 vertical, 11 lateral)")
    e.add_argument("--hpf", default=None, help="high-pass cutoff Hz, or 'none' (default 0.5 lateral only)")
    e.add_argument("--calibration", type=float, default=1.0)
    e.add_argument("--L", type=float, default=40.0)
    e.add_argument("--S", type=float, default=0.1)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    i = sub.add_parser("iri", help="IRI segments of a profile")
    i.add_argument("--profile", required=True)
    i.add_argument("--L", type=float, default=40.0)
    i.add_argument("--S", type=float, default=0.1)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_iri)

    y = sub.add_parser("sysid", help="identify half-car parameters from a drive and its profile")
    y.add_argument("--drive", required=True)
    y.add_argument("--profile", required=True)
    y.add_argument("--params", default="audi", help="source of the fixed m_s, m_u, l")
    y.add_argument("--match", default="station", help="station, or geo[:DMAX:PHIMAX]")
    y.add_argument("--band", default="0.5:15")
    y.add_argument("--smoothing", type=float, default=0.5)
    y.add_argument("--lpf", default="none")
    y.add_argument("--init-Is", type=float, default=None)
    y.add_argument("--starts", type=int, default=5)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--params-out", default=None)
    y.add_argument("--out", required=True)
    y.set_defaults(func=cmd_sysid)

    m = sub.add_parser("match", help="link drive samples to profile samples by position")
    m.add_argument("--imu", required=True)
    m.add_argument("--ref", required=True)
    m.add_argument("--dmax", type=float, default=4.0)
    m.add_argument("--phimax", type=float, default=45.0)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_match)

    v = sub.add_parser("eval", help="compare estimated and reference segments")
    v.add_argument("--est", required=True)
    v.add_argument("--ref", required=True)
    v.add_argument("--alignment", choices=("station", "position"), default="station")
    v.add_argument("--hist", default=None, help="histogram CSV (0.1 mm/m bins)")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
