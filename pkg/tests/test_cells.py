import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import box

from oracles import GEO, flood_fill_components, random_dbz_frame
from stormoutage.cells import (
    buffer_geometry, cell_feature, cell_from_feature, decode_runs, encode_runs, identify_cells, pixels_to_polygon,
)
from stormoutage.grid import GeoTransform, RadarFrame


def test_two_by_two_block():
    v = np.zeros((6, 6))
    v[2:4, 2:4] = 40.0
    cells = identify_cells(RadarFrame(0, v, GEO))
    assert len(cells) == 1
    assert cells[0].area_km2 == pytest.approx(0.25)
    assert cells[0].polygon.area == pytest.approx(250_000.0)


def test_threshold_is_inclusive():
    v = np.zeros((3, 3))
    v[1, 1] = 35.0
    assert len(identify_cells(RadarFrame(0, v, GEO))) == 1
    v[1, 1] = 34.99
    assert identify_cells(RadarFrame(0, v, GEO)) == []


def test_diagonal_pixels_join():
    v = np.zeros((4, 4))
    v[0, 0] = v[1, 1] = v[2, 2] = 50.0
    assert len(identify_cells(RadarFrame(0, v, GEO))) == 1


def test_nan_never_exceeds():
    v = np.full((3, 3), np.nan)
    assert identify_cells(RadarFrame(0, v, GEO)) == []


def test_cells_ordered_by_size():
    v = np.zeros((10, 10))
    v[0, 0] = 50
    v[5:8, 5:8] = 50
    cells = identify_cells(RadarFrame(0, v, GEO))
    assert [c.n_pixels for c in cells] == [9, 1]
    assert [c.cell_id for c in cells] == [0, 1]


def test_cell_statistics():
    v = np.zeros((3, 3))
    v[1, 1], v[1, 2] = 40.0, 50.0
    (c,) = identify_cells(RadarFrame(0, v, GEO))
    assert (c.dbz_max, c.dbz_mean, c.dbz_std) == (50.0, 45.0, 5.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_matches_flood_fill(seed):
    fr = random_dbz_frame(np.random.default_rng(seed), (40, 40))
    got = {c.pixel_keys() for c in identify_cells(fr)}
    assert got == flood_fill_components(fr.values >= 35)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_polygon_area_matches_pixel_count(seed):
    fr = random_dbz_frame(np.random.default_rng(seed), (32, 32))
    for c in identify_cells(fr):
        assert c.polygon.area == pytest.approx(c.n_pixels * 250.0 ** 2)
        assert c.polygon.is_valid


@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, unique=True))
def test_run_encoding_roundtrip(pix):
    p = np.array(pix)
    back = decode_runs(encode_runs(p))
    assert {tuple(x) for x in back.tolist()} == set(pix)


def test_buffer_distance():
    sq = box(0, 0, 1000, 1000)
    g = buffer_geometry(sq, 0.1, GEO)
    # area of a square dilated by d: a^2 + 4 a d + pi d^2 (polygonal approximation is slightly smaller)
    d = 11132.0
    exact = 1000 ** 2 + 4 * 1000 * d + np.pi * d * d
    assert g.area == pytest.approx(exact, rel=2e-3)
    assert g.area < exact


def test_buffer_zero_and_negative():
    sq = box(0, 0, 10, 10)
    assert buffer_geometry(sq, 0.0, GEO).equals(sq)
    with pytest.raises(ValueError):
        buffer_geometry(sq, -0.1, GEO)


def test_buffer_needs_anchor():
    with pytest.raises(ValueError):
        buffer_geometry(box(0, 0, 1, 1), 0.1, GeoTransform(0, 0, 250, None))


def test_feature_roundtrip():
    fr = random_dbz_frame(np.random.default_rng(3), (32, 32), timestamp=600)
    for c in identify_cells(fr):
        back = cell_from_feature(cell_feature(c), GEO)
        assert back.pixel_keys() == c.pixel_keys()
        assert back.polygon.equals(c.polygon)
        assert back.timestamp == 600


def test_polygon_of_ring_has_hole():
    px = [(r, c) for r in range(3) for c in range(3) if (r, c) != (1, 1)]
    poly = pixels_to_polygon(np.array(px), GEO)
    assert poly.area == pytest.approx(8 * 250.0 ** 2)
    assert len(poly.interiors) == 1
