import numpy as np
import pytest

from asfkit.geometry import (FrameError, LocalCoord, WaterwayFrame,
                             global_coords, local_coords, to_global, to_local)


def random_frame(rng):
    theta = rng.uniform(0, 2 * np.pi)
    along = (np.sin(theta), np.cos(theta))
    cross = (-along[1], along[0])
    origin = tuple(rng.uniform(-1e4, 1e4, 2))
    return WaterwayFrame(origin=origin, along_unit=along, cross_unit=cross)


def test_origin_maps_to_zero():
    f = WaterwayFrame.from_heading((12.0, -7.0), 123.0)
    c = to_local(f, (12.0, -7.0))
    assert c.s == 0.0 and c.l == 0.0


def test_identity_frame():
    # heading 90 deg: along = east, cross = north
    f = WaterwayFrame.from_heading((0.0, 0.0), 90.0)
    c = to_local(f, (3.0, 4.0))
    assert c.s == pytest.approx(3.0, abs=1e-12)
    assert c.l == pytest.approx(4.0, abs=1e-12)
    p = to_global(f, LocalCoord(s=100.0, l=-20.0))
    assert np.allclose(p, [100.0, -20.0], atol=1e-9)


def test_round_trip_random_points():
    rng = np.random.default_rng(123)
    for _ in range(25):
        f = random_frame(rng)
        pts = rng.uniform(-5e3, 5e3, (40, 2))
        s, l = local_coords(f, pts)
        back = global_coords(f, s, l)
        assert np.max(np.abs(back - pts)) < 1e-9


def test_norm_preserved():
    rng = np.random.default_rng(7)
    for _ in range(10):
        f = random_frame(rng)
        p = rng.uniform(-1e3, 1e3, 2)
        c = to_local(f, p)
        r_local = np.hypot(c.s, c.l)
        r_global = np.hypot(p[0] - f.origin[0], p[1] - f.origin[1])
        assert abs(r_local - r_global) < 1e-9


def test_heading_round_trip():
    for heading in (-179.0, -90.0, 0.0, 37.0, 90.0, 179.5):
        f = WaterwayFrame.from_heading((0.0, 0.0), heading)
        assert f.heading_deg == pytest.approx(heading, abs=1e-12)


def test_bad_frames_rejected():
    with pytest.raises(FrameError):
        WaterwayFrame(origin=(0, 0), along_unit=(1.0, 0.1), cross_unit=(0, 1))
    with pytest.raises(FrameError):
        WaterwayFrame(origin=(0, 0), along_unit=(1, 0), cross_unit=(1, 0))
