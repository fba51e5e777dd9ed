"""Calibration slope and binned error statistics of estimated vs reference IRI."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .geomatch import MatchConfig, match

BIN_EDGES = (0.0, 2.0, 4.0, 6.0, 12.0)
HIST_WIDTH = 0.1


def fit_calibration(estimates, references) -> float:
    """Through-origin least-squares slope ``sum(e r) / sum(e^2)``."""
    e = np.asarray(estimates, dtype=float).ravel()
    r = np.asarray(references, dtype=float).ravel()
    if e.shape != r.shape:
        raise ValidationError("estimates and references differ in length")
    if e.size < 2:
        raise ValidationError("need at least 2 pairs")
    ee = float(np.dot(e, e))
    if ee == 0:
        raise ValidationError("all estimates are zero; slope undefined")
    slope = float(np.dot(e, r)) / ee
    if not slope > 0:
        raise ValidationError(f"fitted slope {slope:g} is not positive")
    return slope


@dataclass(frozen=True)
class BinStats:
    lo: float
    hi: float
    n: int
    mean: float
    std: float
    rmse: float
    distance_km: float


@dataclass
class EvalReport:
    bins: List[BinStats]
    overall: BinStats
    hist_edges: np.ndarray
    hist_est: np.ndarray
    hist_ref: np.ndarray
    alignment: str


def _stats(err, lo, hi, L) -> BinStats:
    n = err.size
    if n == 0:
        return BinStats(lo, hi, 0, np.nan, np.nan, np.nan, 0.0)
    std = float(np.std(err, ddof=1)) if n > 1 else 0.0
    return BinStats(lo, hi, n, float(err.mean()), std, float(np.sqrt(np.mean(err**2))), n * L / 1000.0)


def align_by_station(est, ref, tol: float = 1e-6):
    """Index pairs of segments with the same start station."""
    ref_starts = np.array([s.start for s in ref])
    order = np.argsort(ref_starts)
    pairs = []
    for i, s in enumerate(est):
        j = np.searchsorted(ref_starts[order], s.start - tol)
        if j < len(order) and abs(ref_starts[order[j]] - s.start) <= tol:
            pairs.append((i, int(order[j])))
    return pairs


def align_by_position(est, ref, cfg: Optional[MatchConfig] = None):
    """Index pairs from position matching of the segment geotags."""
    if any(s.lat is None for s in est) or any(s.lat is None for s in ref):
        raise ValidationError("position alignment needs geotags on all segments")
    if len(est) < 2 or len(ref) < 2:
        raise ValidationError("position alignment needs at least 2 segments per trace")
    cfg = cfg or MatchConfig(d_max=20.0, phi_max=45.0)
    res = match([s.lat for s in est], [s.lon for s in est], [s.lat for s in ref], [s.lon for s in ref], cfg)
    return [(i, int(j)) for i, j in enumerate(res.ref_index) if j >= 0]


def evaluate(est, ref, alignment: str = "station", skip_flags: Sequence[str] = ("partial",),
             match_cfg: Optional[MatchConfig] = None) -> EvalReport:
    """Error statistics of ``est - ref`` binned by reference IRI.

    Bins are half-open ``[lo, hi)`` with edges 0, 2, 4, 6, 12 mm/m; values at
    or above 12 count only in the overall row. Segments carrying any of
    ``skip_flags`` are left out.
    """
    est = [s for s in est if not set(s.flags) & set(skip_flags)]
    ref = [s for s in ref if not set(s.flags) & set(skip_flags)]
    if alignment == "station":
        pairs = align_by_station(est, ref)
    elif alignment == "position":
        pairs = align_by_position(est, ref, match_cfg)
    else:
        raise ValidationError(f"alignment must be 'station' or 'position', got {alignment!r}")
    if not pairs:
        raise ValidationError("no overlapping segments between estimate and reference")
    e = np.array([est[i].iri for i, _ in pairs])
    r = np.array([ref[j].iri for _, j in pairs])
    L = float(np.median([ref[j].length for _, j in pairs]))
    err = e - r
    bins = []
    for lo, hi in zip(BIN_EDGES[:-1], BIN_EDGES[1:]):
        m = (r >= lo) & (r < hi)
        bins.append(_stats(err[m], lo, hi, L))
    overall = _stats(err, BIN_EDGES[0], np.inf, L)
    top = max(BIN_EDGES[-1], float(np.ceil(max(e.max(), r.max()) / HIST_WIDTH)) * HIST_WIDTH)
    n_hist = int(round(top / HIST_WIDTH))
    edges = np.round(HIST_WIDTH * np.arange(n_hist + 1), 10)
    h_est = np.histogram(np.clip(e, 0, None), edges)[0]
    h_ref = np.histogram(np.clip(r, 0, None), edges)[0]
    return EvalReport(bins, overall, edges, h_est, h_ref, alignment)


def report_rows(rep: EvalReport):
    rows = [("%g-%g" % (b.lo, b.hi), b.n, b.mean, b.std, b.rmse, b.distance_km) for b in rep.bins]
    o = rep.overall
    rows.append(("overall", o.n, o.mean, o.std, o.rmse, o.distance_km))
    return rows


REPORT_COLUMNS = ("iri_bin_mm_per_m", "n_segments", "mean_error", "std_error", "rmse", "distance_km")
HIST_COLUMNS = ("bin_lo", "bin_hi", "count_estimate", "count_reference")
