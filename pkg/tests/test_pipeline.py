import csv
import json
import os

import numpy as np
import pytest

from stormoutage import cli
from stormoutage import pipeline as pl
from stormoutage.features import SCHEMA_VERSION, read_dataset_csv

SMALL = {
    "scene": {"width": 256, "height": 256, "n_storms": 3, "n_transformers": 2000,
              "speed_range": [2, 4], "min_separation_km": 20},
    "mlp": {"epochs": 20},
    "rfc": {"n_trees": 15},
}


def small_cfg(out_dir, **kw):
    d = dict(SMALL)
    d.update(kw)
    return pl.PipelineConfig(out_dir=str(out_dir), **d)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = small_cfg(out)
    pl.run_all(cfg)
    return cfg


def _comment(path):
    with open(path) as f:
        return f.readline()


def test_artifacts_exist(run_dir):
    expected = [
        "frames/frames.json", "ground/transformers.csv", "ground/outages.csv", "ground/stations.csv",
        "ground/strikes.csv", "truth.json", "detect/cells.geojson", "detect/clusters.geojson",
        "track/clusters_tracked.geojson", "track/tracks.jsonl", "dataset/dataset.csv", "dataset/dataset_filt.csv",
        "train/rfc_model.json", "train/mlp_model.json", "train/mlp_history.csv", "train/smote_provenance.csv",
        "train/split.json", "eval/rfc_metrics.json", "eval/rfc_metrics.txt", "eval/rfc_confusion.csv",
        "eval/rfc_pr_curves.csv", "eval/mlp_metrics.json", "predict/predictions_rfc.jsonl",
    ]
    for rel in expected:
        assert os.path.exists(run_dir.path(rel)), rel
    assert len([n for n in os.listdir(run_dir.path("frames")) if n.endswith(".asc")]) == 24


def test_artifacts_carry_schema_and_hash(run_dir):
    h = run_dir.hash()
    for rel in ("dataset/dataset.csv", "ground/outages.csv", "train/smote_provenance.csv"):
        assert f"schema_version={SCHEMA_VERSION} config_hash={h}" in _comment(run_dir.path(rel))
    with open(run_dir.path("detect/clusters.geojson")) as f:
        assert json.load(f)["metadata"]["config_hash"] == h
    with open(run_dir.path("track/tracks.jsonl")) as f:
        assert json.loads(f.readline())["_meta"]["schema_version"] == SCHEMA_VERSION
    with open(run_dir.path("train/rfc_model.json")) as f:
        assert json.load(f)["meta"]["config_hash"] == h


def test_hash_ignores_out_dir():
    assert small_cfg("a").hash() == small_cfg("b").hash() != small_cfg("a", seed=1).hash()


def test_dataset_rows_match_tracks(run_dir):
    ds = read_dataset_csv(run_dir.path("dataset/dataset.csv"))
    recs = pl._read_jsonl(run_dir.path("track/tracks.jsonl"))
    assert len(ds) == len(recs) > 0
    assert not np.isnan(ds.X).any()  # imputed
    flt = read_dataset_csv(run_dir.path("dataset/dataset_filt.csv"))
    assert not flt.missing.any()


def test_smote_never_touches_validation_rows(run_dir):
    with open(run_dir.path("train/split.json")) as f:
        split = json.load(f)
    train = set(split["train_rows"])
    with open(run_dir.path("train/smote_provenance.csv")) as f:
        rows = list(csv.DictReader(ln for ln in f if not ln.startswith("#")))
    for r in rows:
        assert int(r["parent_row"]) in train and int(r["neighbor_row"]) in train


def test_predictions_have_24_leads(run_dir):
    recs = pl._read_jsonl(run_dir.path("predict/predictions_rfc.jsonl"))
    n_tracked = len(pl._read_jsonl(run_dir.path("track/tracks.jsonl")))
    assert len(recs) == 24 * n_tracked
    leads = sorted({r["lead_minutes"] for r in recs})
    assert leads == [5 * k for k in range(1, 25)]
    for r in recs[:48]:
        assert abs(sum(r["probabilities"]) - 1) < 1e-5
        assert r["valid_time"] == r["issued"] + 60 * r["lead_minutes"]


def test_metrics_report_rows(run_dir):
    with open(run_dir.path("eval/rfc_metrics.json")) as f:
        d = json.load(f)
    assert [label for label, _ in d["table"]] == [label for label, _ in pl.METRIC_ROWS]
    table = dict(d["table"])
    assert table["Precision micro average"] == pytest.approx(table["Accuracy"])


def test_stages_rerun_deterministically(run_dir, tmp_path):
    before = open(run_dir.path("track/tracks.jsonl"), "rb").read()
    pl.run_track(run_dir)
    assert open(run_dir.path("track/tracks.jsonl"), "rb").read() == before


def test_filtered_and_single_model(tmp_path):
    # dense, fully equipped stations so the complete-rows table keeps every class
    scene = dict(SMALL["scene"], n_stations=400, station_capability=1.0, n_storms=4, width=320, height=320)
    cfg = small_cfg(tmp_path, model="rfc", data="filtered", stratified=True, scene=scene, seed=1)
    pl.run_all(cfg)
    with open(cfg.path("train/split.json")) as f:
        assert json.load(f)["dataset"] == "dataset_filt.csv"
    assert not os.path.exists(cfg.path("train/mlp_model.json"))


def test_too_little_data_is_a_data_error(tmp_path):
    cfg = small_cfg(tmp_path, model="rfc")
    pl.run_generate(cfg)
    pl.run_detect(cfg)
    pl.run_track(cfg)
    pl.run_featurize(cfg)
    ds = read_dataset_csv(cfg.path("dataset/dataset.csv"))
    from stormoutage.features import write_dataset_csv

    write_dataset_csv(ds.subset(np.flatnonzero(ds.y == ds.y[0])), cfg.path("dataset/dataset.csv"))
    with pytest.raises(pl.DataError):
        pl.run_train(cfg)


def test_config_validation():
    with pytest.raises(pl.ConfigError):
        small_cfg("x", model="svm").validate()
    with pytest.raises(pl.ConfigError):
        small_cfg("x", radius_km=0).validate()
    with pytest.raises(pl.ConfigError):
        small_cfg("x", f1_formula="half").validate()


def test_cli_exit_codes(tmp_path, run_dir):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_key": 1}))
    assert cli.main(["detect", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert cli.main(["detect", "--out-dir", str(tmp_path / "o"), "--frames-dir", str(tmp_path / "missing")]) == cli.EXIT_CONFIG

    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["detect", "--out-dir", str(tmp_path / "e"), "--frames-dir", str(empty)]) == cli.EXIT_OK
    with open(tmp_path / "e" / "detect" / "cells.geojson") as f:
        assert json.load(f)["features"] == []

    corrupt = tmp_path / "corrupt"
    corrupt.mkdir()
    (corrupt / "20170714T024000Z.asc").write_text("ncols 2\nnrows 2\ngarbage\n")
    assert cli.main(["detect", "--out-dir", str(tmp_path / "c"), "--frames-dir", str(corrupt)]) == cli.EXIT_DATA

    assert cli.main(["evaluate", "--out-dir", str(tmp_path / "nothing")]) == cli.EXIT_DATA


def test_cli_model_error(run_dir, tmp_path):
    import shutil

    out = tmp_path / "copy"
    shutil.copytree(run_dir.out_dir, out)
    with open(out / "train" / "rfc_model.json") as f:
        d = json.load(f)
    d["meta"]["schema_version"] = SCHEMA_VERSION + 1
    with open(out / "train" / "rfc_model.json", "w") as f:
        json.dump(d, f)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    assert cli.main(["predict", "--config", str(cfg), "--out-dir", str(out)]) == cli.EXIT_MODEL
    (out / "train" / "mlp_model.json").write_text("{not json")
    assert cli.main(["evaluate", "--config", str(cfg), "--out-dir", str(out), "--model", "mlp"]) == cli.EXIT_MODEL
