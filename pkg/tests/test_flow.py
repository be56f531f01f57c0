import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import GEO, textured_pair
from stormoutage.flow import MotionField, estimate_flow, flow_between
from stormoutage.grid import RadarFrame


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 32 - 1))
def test_recovers_translation(dx, dy, seed):
    a, b = textured_pair(np.random.default_rng(seed), (dx, dy))
    f = estimate_flow(a, b)
    inner = (slice(2, -2), slice(2, -2))
    err = np.hypot(f.u[inner] - dx, f.v[inner] - dy)
    assert err.mean() < 0.5


def test_zero_motion():
    a, _ = textured_pair(np.random.default_rng(1), (0, 0))
    b = RadarFrame(300, a.values, GEO)
    f = estimate_flow(a, b)
    assert np.abs(f.u).max() < 1e-9 and np.abs(f.v).max() < 1e-9


def test_flat_field_has_zero_confidence():
    a = RadarFrame(0, np.full((32, 32), 10.0), GEO)
    b = RadarFrame(300, np.full((32, 32), 10.0), GEO)
    f = estimate_flow(a, b)
    assert np.all(f.confidence == 0) and np.all(f.u == 0)


def test_stride_grid_shape():
    a, b = textured_pair(np.random.default_rng(2), (1, 0), shape=(64, 48))
    f = estimate_flow(a, b, stride=4)
    assert f.u.shape == (16, 12) and f.stride == 4
    dense = flow_between(a.values, b.values, stride=1)
    assert dense.u.shape == (64, 48)


def test_rejects_bad_pairs():
    a = RadarFrame(0, np.zeros((8, 8)), GEO)
    with pytest.raises(ValueError):
        estimate_flow(a, RadarFrame(300, np.zeros((8, 9)), GEO))
    with pytest.raises(ValueError):
        estimate_flow(a, RadarFrame(0, np.zeros((8, 8)), GEO))


def test_mean_over_weights_by_confidence():
    mf = MotionField(np.array([[1.0, 3.0]]), np.zeros((1, 2)), np.array([[0.9, 0.3]]), stride=1)
    px = np.array([[0, 0], [0, 1]])
    assert mf.mean_over(px) == (1.0, 0.0)
    assert mf.mean_over(px, min_confidence=0.2) == pytest.approx((1.5, 0.0))
    assert mf.mean_over(px, min_confidence=0.95) == (0.0, 0.0)
