import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stormoutage.smote import SamplingError, SmoteConfig, nearest_neighbors, smote_oversample


def skewed(seed, counts=(200, 12, 7, 3), d=5):
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(len(counts)), counts)
    X = rng.normal(size=(len(y), d)) + y[:, None] * 3.0
    return X, y


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_balanced_and_interpolated(seed):
    X, y = skewed(seed)
    r = smote_oversample(X, y, SmoteConfig(k=5, seed=seed))
    assert np.all(np.bincount(r.y) == 200)
    np.testing.assert_array_equal(r.X[:len(X)], X)
    syn = r.X[r.n_original:]
    resid = syn - (X[r.parent] + r.lam[:, None] * (X[r.neighbor] - X[r.parent]))
    assert np.abs(resid).max() < 1e-9
    assert np.all((r.lam >= 0) & (r.lam < 1))
    assert np.all(y[r.parent] == r.y[r.n_original:]) and np.all(y[r.neighbor] == y[r.parent])
    assert np.all(r.parent != r.neighbor)


def test_neighbors_are_nearest():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    nn = nearest_neighbors(X, 5)
    d = np.linalg.norm(X[:, None] - X[None], axis=2)
    np.fill_diagonal(d, np.inf)
    np.testing.assert_array_equal(nn, np.argsort(d, axis=1, kind="stable")[:, :5])


def test_lambda_zero_and_one():
    X, y = skewed(1)
    r0 = smote_oversample(X, y, SmoteConfig(seed=1), lam=0.0)
    np.testing.assert_array_equal(r0.X[r0.n_original:], X[r0.parent])
    r1 = smote_oversample(X, y, SmoteConfig(seed=1), lam=1.0)
    np.testing.assert_allclose(r1.X[r1.n_original:], X[r1.neighbor])


def test_single_sample_class_raises():
    X, y = skewed(0, counts=(20, 1))
    with pytest.raises(SamplingError):
        smote_oversample(X, y)


def test_small_class_uses_fewer_neighbors():
    X, y = skewed(0, counts=(20, 3))
    r = smote_oversample(X, y, SmoteConfig(k=5))
    assert np.bincount(r.y).tolist() == [20, 20]


def test_already_balanced_is_identity():
    X, y = skewed(0, counts=(10, 10))
    r = smote_oversample(X, y)
    assert len(r.parent) == 0
    np.testing.assert_array_equal(r.X, X)


def test_deterministic():
    X, y = skewed(4)
    a = smote_oversample(X, y, SmoteConfig(seed=9))
    b = smote_oversample(X, y, SmoteConfig(seed=9))
    np.testing.assert_array_equal(a.X, b.X)
