import os

import numpy as np
import pytest

from roadrough.errors import ValidationError
from roadrough.io import (DRIVE_COLUMNS, DriveData, atomic_write, fmt, ingest_drive, read_params, read_profile,
                          read_segments, write_drive, write_params, write_profile, write_rows, write_segments)
from roadrough.iri import IriSegment
from roadrough.models import golden_car_params, identified_car_params
from roadrough.simulate import RoadProfile, synth_profile

HEADER = ",".join(DRIVE_COLUMNS)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_fmt():
    assert fmt(0.1 + 0.2) == "0.3"
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(12345678912.0) == "1.23456789e+10"
    assert fmt(None) == "" and fmt(float("nan")) == ""
    assert fmt(7) == "7" and fmt(np.int64(3)) == "3" and fmt(True) == "1"


def test_three_row_drive(tmp_path):
    p = write(tmp_path, "d.csv", HEADER + "\n0,9.8,0.1,20,58,15\n0.02,9.9,0.0,20,58,15\n0.04,9.7,-0.1,20,58,15\n")
    d = ingest_drive(p)
    assert len(d) == 3
    np.testing.assert_allclose(d.az, [9.8, 9.9, 9.7])
    assert d.dt == pytest.approx(0.02)
    assert d.gaps == ()


def test_negative_speed_names_line(tmp_path):
    p = write(tmp_path, "d.csv", HEADER + "\n0,9.8,0,20,58,15\n0.02,9.8,0,-1,58,15\n")
    with pytest.raises(ValidationError, match=r":3: negative speed"):
        ingest_drive(p)


def test_duplicate_timestamp_names_both_lines(tmp_path):
    p = write(tmp_path, "d.csv", HEADER + "\n0,9.8,0,20,58,15\n0.02,9.8,0,20,58,15\n0.02,9.8,0,20,58,15\n")
    with pytest.raises(ValidationError, match=r"lines 3 and 4"):
        ingest_drive(p)


def test_backwards_time_and_malformed_rows(tmp_path):
    p = write(tmp_path, "d.csv", HEADER + "\n0.04,9.8,0,20,58,15\n0.02,9.8,0,20,58,15\n")
    with pytest.raises(ValidationError, match="backwards"):
        ingest_drive(p)
    p = write(tmp_path, "e.csv", HEADER + "\n0,9.8,0,20,58,15\n0.02,abc,0,20,58,15\n")
    with pytest.raises(ValidationError, match=r":3: column az_mps2"):
        ingest_drive(p)
    p = write(tmp_path, "f.csv", HEADER + "\n0,9.8,0,20\n")
    with pytest.raises(ValidationError, match=r":2: expected 6 fields"):
        ingest_drive(p)
    p = write(tmp_path, "g.csv", "t_s,az_mps2\n0,1\n")
    with pytest.raises(ValidationError, match="missing column"):
        ingest_drive(p)
    with pytest.raises(ValidationError, match="cannot open"):
        ingest_drive(tmp_path / "nope.csv")
    with pytest.raises(ValidationError, match="empty"):
        ingest_drive(write(tmp_path, "h.csv", ""))


def test_gap_report(tmp_path):
    rows = "\n".join(f"{t:.2f},9.8,0,20,,"for t in (0, 0.02, 0.04, 0.10, 0.12))
    d = ingest_drive(write(tmp_path, "d.csv", HEADER + "\n" + rows + "\n"))
    assert d.gaps == ((5, pytest.approx(0.06)),)
    assert d.lat is None and d.lon is None


def test_drive_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    t = 0.02 * np.arange(50)
    d = DriveData(t, 9.82 + rng.normal(size=50), rng.normal(size=50), np.full(50, 20.0),
                  58 + 1e-5 * t, 15 + 0 * t)
    write_drive(tmp_path / "d.csv", d)
    back = ingest_drive(tmp_path / "d.csv")
    for k in ("t", "az", "ax", "v", "lat", "lon"):
        np.testing.assert_allclose(getattr(back, k), getattr(d, k), rtol=1e-8)


def test_profile_round_trip(tmp_path):
    p = synth_profile("B", 40, seed=1, origin=(58.0, 15.0))
    write_profile(tmp_path / "p.csv", p, station0=100.0)
    q, s0 = read_profile(tmp_path / "p.csv")
    assert s0 == 100.0 and q.S == 0.1
    np.testing.assert_allclose(q.left, p.left, rtol=1e-8, atol=1e-15)
    np.testing.assert_allclose(q.right, p.right, rtol=1e-8, atol=1e-15)
    np.testing.assert_allclose(q.lat, p.lat, rtol=1e-9)
    single = RoadProfile(0.25, np.arange(5.0))
    write_profile(tmp_path / "s.csv", single)
    q, _ = read_profile(tmp_path / "s.csv")
    np.testing.assert_allclose(q.left, np.arange(5.0))
    # single-track profiles write the left track into both columns
    np.testing.assert_allclose(q.right, np.arange(5.0))


def test_profile_errors(tmp_path):
    with pytest.raises(ValidationError, match="strictly increasing"):
        read_profile(write(tmp_path, "a.csv", "station_m,elev_left_m\n0,0\n0.1,0\n0.1,0\n"))
    with pytest.raises(ValidationError, match="uniformly"):
        read_profile(write(tmp_path, "b.csv", "station_m,elev_left_m\n0,0\n0.1,0\n0.3,0\n"))
    with pytest.raises(ValidationError, match="at least 2"):
        read_profile(write(tmp_path, "c.csv", "station_m,elev_left_m\n0,0\n"))
    with pytest.raises(ValidationError, match="partly empty"):
        read_profile(write(tmp_path, "d.csv", "station_m,elev_left_m,elev_right_m\n0,0,1\n0.1,0,\n"))


def test_segments_round_trip(tmp_path):
    segs = [IriSegment(0.0, 40.0, 1.23456789012, 400, 58.1, 15.2, ("transient",)),
            IriSegment(40.0, 60.0, 2.5, 200, None, None, ("partial",)),
            IriSegment(60.0, 100.0, 0.0, 400)]
    write_segments(tmp_path / "s.csv", segs)
    text = (tmp_path / "s.csv").read_text()
    assert text.splitlines()[0] == "start_station_m,end_station_m,iri_mm_per_m,lat_deg,lon_deg,flags"
    assert "1.23456789," in text
    back = read_segments(tmp_path / "s.csv")
    assert [s.flags for s in back] == [("transient",), ("partial",), ()]
    assert back[1].lat is None and back[0].lat == 58.1
    assert back[0].iri == pytest.approx(1.23456789)


def test_params_named_and_file(tmp_path):
    assert read_params("golden") == golden_car_params()
    assert read_params("audi") == identified_car_params()
    p = write(tmp_path, "p.txt", "# tuned\nbase = audi\nK_s = 40000  # softer\n")
    q = read_params(p)
    assert q.K_s == 40000 and q.K_t == identified_car_params().K_t
    full = write(tmp_path, "f.txt", "m_s=1\nm_u=0.15\nK_s=63.3\nC_s=6\nK_t=653\n")
    assert read_params(full).K_t == 653


@pytest.mark.parametrize("text,msg", [("K_s 1\n", "key = value"), ("base = bmw\n", "unknown parameter set"),
                                      ("Q = 1\n", "unknown key"), ("base = audi\nK_s = x\n", "not a number"),
                                      ("K_s = 1\n", "missing parameter")])
def test_params_errors(tmp_path, text, msg):
    with pytest.raises(ValidationError, match=msg):
        read_params(write(tmp_path, "p.txt", text))


def test_params_round_trip(tmp_path):
    write_params(tmp_path / "p.txt", identified_car_params(), {"mu": 0.72, "note": "synthetic"})
    assert read_params(tmp_path / "p.txt") == identified_car_params()
    assert "# mu = 0.72" in (tmp_path / "p.txt").read_text()


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write(tmp_path / "x.csv", "a\n")
    atomic_write(tmp_path / "x.csv", "b\n")
    assert (tmp_path / "x.csv").read_text() == "b\n"
    assert os.listdir(tmp_path) == ["x.csv"]
    with pytest.raises(OSError):
        atomic_write(tmp_path / "missing" / "x.csv", "c\n")


def test_write_rows_is_deterministic(tmp_path):
    rows = [(0.1, 2, None, "x"), (1e-12, -3, 4.5, "")]
    write_rows(tmp_path / "a.csv", ("a", "b", "c", "d"), rows)
    write_rows(tmp_path / "b.csv", ("a", "b", "c", "d"), rows)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text() == "a,b,c,d\n0.1,2,,x\n1e-12,-3,4.5,\n"
