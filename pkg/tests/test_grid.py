import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stormoutage.grid import (
    BoundsError, FrameFormatError, frame_filename, GeoTransform, RadarFrame, check_sequence, iso_timestamp,
    parse_iso_timestamp, pixel_to_world, read_ascii_grid, read_frames, world_to_pixel, write_ascii_grid,
    write_frames,
)

GEO = GeoTransform(0.0, 0.0, 250.0)


def test_pixel_centers():
    assert pixel_to_world(GEO, (0, 0)) == (125.0, -125.0)
    assert pixel_to_world(GEO, (4, 0)) == (1125.0, -125.0)


def test_out_of_bounds_raises():
    with pytest.raises(BoundsError):
        pixel_to_world(GEO, (10, 0), shape=(5, 10))
    with pytest.raises(BoundsError):
        world_to_pixel(GEO, (-1.0, -1.0), shape=(5, 5))


@given(st.integers(0, 511), st.integers(0, 511))
def test_pixel_world_roundtrip(col, row):
    xy = pixel_to_world(GEO, (col, row), shape=(512, 512))
    assert world_to_pixel(GEO, xy, shape=(512, 512)) == (col, row)


def test_degrees_to_meters():
    assert GEO.degrees_to_meters(0.1) == pytest.approx(11132.0)


def test_frame_is_read_only():
    fr = RadarFrame(0, np.zeros((3, 4)), GEO)
    with pytest.raises(ValueError):
        fr.values[0, 0] = 1.0
    assert fr.shape == (3, 4)


def test_check_sequence_rejects_geometry_change():
    a = RadarFrame(0, np.zeros((3, 3)), GEO)
    b = RadarFrame(300, np.zeros((3, 4)), GEO)
    with pytest.raises(FrameFormatError, match=iso_timestamp(300)):
        check_sequence([a, b])


def test_check_sequence_rejects_gap():
    a = RadarFrame(0, np.zeros((3, 3)), GEO)
    b = RadarFrame(900, np.zeros((3, 3)), GEO)
    with pytest.raises(FrameFormatError, match="expected 300 s"):
        check_sequence([a, b])


@given(st.integers(0, 2_000_000_000))
def test_iso_roundtrip(ts):
    assert parse_iso_timestamp(iso_timestamp(ts)) == ts


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_ascii_grid_roundtrip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    vals = np.round(rng.uniform(-32, 95, (5, 7)), 2)
    fr = RadarFrame(1_500_000_000, vals, GeoTransform(1000.0, 5000.0, 250.0))
    p = tmp_path_factory.mktemp("g") / frame_filename(fr.timestamp)
    write_ascii_grid(fr, p)
    back = read_ascii_grid(p)
    np.testing.assert_array_equal(back.values, vals)
    assert back.timestamp == fr.timestamp and back.same_geometry(fr)


def test_read_frames_sorted(tmp_path):
    frames = [RadarFrame(t, np.full((2, 2), float(t % 7)), GEO) for t in (600, 0, 300)]
    write_frames(frames, tmp_path)
    back = read_frames(tmp_path)
    assert [f.timestamp for f in back] == [0, 300, 600]


def test_read_frames_missing_dir(tmp_path):
    with pytest.raises(FrameFormatError):
        read_frames(tmp_path / "nope")
