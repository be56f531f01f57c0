import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import blobs
from stormoutage.mlp import (
    MlpConfig, MlpModel, backward, cross_entropy, forward, init_params, one_hot, softmax, train_mlp,
)


def test_architecture():
    p = init_params(MlpConfig())
    assert [w.shape for w in p.W] == [(16, 20), (20, 16), (16, 8), (8, 4), (4, 4)]


@given(st.integers(0, 2 ** 32 - 1))
def test_softmax_rows_sum_to_one(seed):
    z = np.random.default_rng(seed).normal(0, 50, (20, 4))
    assert np.abs(softmax(z).sum(axis=1) - 1).max() < 1e-9


def test_uniform_prediction_loss_is_ln4():
    y = one_hot([0, 1, 2, 3, 1], 4)
    assert cross_entropy(y, np.full((5, 4), 0.25)) == pytest.approx(np.log(4), abs=1e-12)


def test_cross_entropy_clips_zero():
    assert np.isfinite(cross_entropy(one_hot([0], 4), np.array([[0.0, 1.0, 0.0, 0.0]])))


def _loss(params, X, Y, cfg):
    return cross_entropy(Y, forward(params, X, cfg))


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000))
def test_gradient_check(seed):
    cfg = MlpConfig(dropout=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 16))
    Y = one_hot(rng.integers(0, 4, 12), 4)
    p = init_params(cfg, rng)
    cache = {}
    forward(p, X, cfg, cache=cache)
    gW, gb = backward(p, cache, Y, cfg)
    worst = 0.0
    eps = 1e-6
    for arrs, grads in ((p.W, gW), (p.b, gb)):
        for a, g in zip(arrs, grads):
            for idx in np.ndindex(a.shape):
                old = a[idx]
                a[idx] = old + eps
                lp = _loss(p, X, Y, cfg)
                a[idx] = old - eps
                lm = _loss(p, X, Y, cfg)
                a[idx] = old
                num = (lp - lm) / (2 * eps)
                denom = max(abs(num) + abs(g[idx]), 1e-8)
                worst = max(worst, abs(num - g[idx]) / denom)
    assert worst < 1e-4


def test_dropout_only_in_train_mode():
    cfg = MlpConfig()
    p = init_params(cfg)
    X = np.random.default_rng(0).normal(size=(50, 16))
    a = forward(p, X, cfg)
    np.testing.assert_array_equal(a, forward(p, X, cfg))
    b = forward(p, X, cfg, train_mode=True, rng=np.random.default_rng(1))
    assert not np.allclose(a, b)
    with pytest.raises(ValueError):
        forward(p, X, cfg, train_mode=True)


def test_rejects_wrong_width():
    cfg = MlpConfig()
    with pytest.raises(ValueError):
        forward(init_params(cfg), np.zeros((2, 15)), cfg)


def test_training_reduces_loss_and_roundtrips(tmp_path):
    X, y = blobs(800, seed=3)
    cfg = MlpConfig(epochs=30)
    params, hist = train_mlp(X, y, cfg)
    assert len(hist) == 30 and hist.train_loss[-1] < hist.train_loss[0]
    m = MlpModel(cfg, params)
    m.save(tmp_path / "m.json")
    back = MlpModel.load(tmp_path / "m.json")
    np.testing.assert_allclose(back.predict_proba(X), m.predict_proba(X))
    hist.to_csv(tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().count("\n") == 31


def test_training_is_deterministic():
    X, y = blobs(300, seed=1)
    cfg = MlpConfig(epochs=5, seed=4)
    a, _ = train_mlp(X, y, cfg)
    b, _ = train_mlp(X, y, cfg)
    np.testing.assert_array_equal(a.flat(), b.flat())
