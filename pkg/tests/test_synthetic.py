import numpy as np
import pytest

from stormoutage.cells import buffer_geometry, identify_cells, pixels_to_polygon
from stormoutage.features import assign_label
from stormoutage.synthetic import (
    REFERENCE_CLASS_COUNTS, ConfigError, StormDescriptor, SyntheticSceneConfig, class_counts_for,
    generate_labeled_table, generate_synthetic_sequence, random_scene_config,
)


def small_scene(seed=0, **kw):
    storm = StormDescriptor(center=(20_000.0, 30_000.0), peak_dbz=55.0, radius_km=4.0, velocity=(5.0, 0.0),
                            outage_fraction=0.3, lightning_rate=3.0)
    cfg = SyntheticSceneConfig(seed=seed, duration_steps=6, width=192, height=192, storms=[storm],
                               n_transformers=1500, **kw)
    return generate_synthetic_sequence(cfg)


def test_frames_cadence_and_shape():
    sc = small_scene()
    assert len(sc.frames) == 6
    assert [f.timestamp - sc.frames[0].timestamp for f in sc.frames] == [300 * k for k in range(6)]
    assert sc.frames[0].shape == (192, 192)


def test_generator_is_deterministic():
    a, b = small_scene(3), small_scene(3)
    for fa, fb in zip(a.frames, b.frames):
        np.testing.assert_array_equal(fa.values, fb.values)
    assert a.outages == b.outages


def test_truth_support_is_the_detected_cell():
    sc = small_scene()
    for step, fr in enumerate(sc.frames):
        (t,) = sc.truth_at(step)
        cells = identify_cells(fr)
        assert {tuple(p) for p in t.pixels.tolist()} in [c.pixel_keys() for c in cells]


def test_truth_share_matches_labeling():
    sc = small_scene()
    for step, fr in enumerate(sc.frames):
        (t,) = sc.truth_at(step)
        geom = buffer_geometry(pixels_to_polygon(t.pixels, fr.geo), 0.1, fr.geo)
        _, share = assign_label(geom, sc.transformers, sc.outages, fr.timestamp)
        assert share == t.outage_share


def test_invalid_configs():
    with pytest.raises(ConfigError):
        generate_synthetic_sequence(SyntheticSceneConfig(width=0))
    with pytest.raises(ConfigError):
        SyntheticSceneConfig(storms=[StormDescriptor(center=(0, 0), outage_fraction=1.5)]).validate()


def test_dict_roundtrip():
    cfg = random_scene_config(1, n_storms=2)
    back = SyntheticSceneConfig.from_dict(cfg.to_dict())
    assert back == cfg


def test_random_scene_storms_separated():
    cfg = random_scene_config(2, n_storms=4, min_separation_km=30)
    for i, a in enumerate(cfg.storms):
        for b in cfg.storms[i + 1:]:
            for t in range(cfg.duration_steps):
                if a.alive(t) and b.alive(t):
                    assert np.hypot(*np.subtract(a.position(t), b.position(t))) >= 30_000


@pytest.mark.parametrize("n", [100, 1000, 885_921])
def test_class_counts_sum(n):
    c = class_counts_for(n)
    assert c.sum() == n
    assert np.all(np.abs(c - n * np.array(REFERENCE_CLASS_COUNTS) / sum(REFERENCE_CLASS_COUNTS)) < 1)


def test_labeled_table_histogram():
    ds = generate_labeled_table(20_000, seed=1)
    pct = 100 * np.bincount(ds.y, minlength=4) / len(ds)
    assert np.all(np.abs(pct - np.array([98.5, 0.6, 0.5, 0.4])) < 0.1)
    assert np.isnan(ds.X[ds.missing]).all()
