"""End-to-end orchestration: frames -> cells -> clusters -> tracks -> dataset -> models -> predictions.

Every stage reads the previous stage's files from ``out_dir`` and writes its
own, so stages can be rerun independently.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import mapping

from . import cells as cells_mod
from .cells import buffer_geometry, cell_feature, cell_from_feature
from .clustering import cluster_feature, cluster_from_feature, gdbscan
from .features import (
    SCHEMA_VERSION, SLOTS, Dataset, LabeledSample, LightningStrike, OutageIndex, OutageRecord,
    TransformerNode, WeatherObservation, class_from_share, extract_features, filter_complete,
    impute_missing, read_dataset_csv, write_dataset_csv,
)
from .forest import RandomForestModel, RfcHyperparams, fit_forest, random_search_cv
from .grid import FRAME_INTERVAL_S, FrameFormatError, check_sequence, read_frames, write_frames
from .metrics import classification_metrics, pr_curve, train_val_split
from .mlp import MlpConfig, MlpModel, train_mlp
from .smote import SamplingError, SmoteConfig, smote_oversample
from .synthetic import ConfigError, SyntheticSceneConfig, generate_synthetic_sequence, random_scene_config
from .tracking import KalmanConfig, Tracker, TrackerConfig, track_record

log = logging.getLogger(__name__)


class DataError(RuntimeError):
    pass


class ModelError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    out_dir: str = "out"
    seed: int = 0
    # inputs; when frames_dir is None the synthetic scene is generated into out_dir
    frames_dir: str | None = None
    transformers_csv: str | None = None
    outages_csv: str | None = None
    stations_csv: str | None = None
    strikes_csv: str | None = None
    scene: dict | None = None  # SyntheticSceneConfig fields
    scene_storms: int = 6  # random storms when ``scene`` lists none
    # thresholds
    threshold_dbz: float = 35.0
    radius_km: float = 2.0
    min_area_km2: float = 20.0
    overlap_frac: float = 0.2
    buffer_degrees: float = 0.1
    kalman_q: float = KalmanConfig.q
    kalman_r: float = KalmanConfig.r
    # learning
    model: str = "both"  # rfc | mlp | both
    data: str = "full"  # full | filtered
    train_frac: float = 0.75
    stratified: bool = False
    f1_formula: str = "standard"  # standard | printed
    smote_k: int = 5
    rfc: dict = field(default_factory=dict)  # RfcHyperparams overrides
    mlp: dict = field(default_factory=dict)  # MlpConfig overrides
    rfc_params_file: str | None = None
    mlp_params_file: str | None = None
    random_search_iter: int = 0
    random_search_folds: int = 3
    n_jobs: int = 1

    def validate(self):
        if self.model not in ("rfc", "mlp", "both"):
            raise ConfigError(f"model must be rfc, mlp or both, got {self.model!r}")
        if self.data not in ("full", "filtered"):
            raise ConfigError(f"data must be full or filtered, got {self.data!r}")
        if self.f1_formula not in ("standard", "printed"):
            raise ConfigError(f"f1_formula must be standard or printed, got {self.f1_formula!r}")
        for name in ("threshold_dbz", "radius_km", "min_area_km2", "overlap_frac", "buffer_degrees"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.train_frac < 1:
            raise ConfigError("train_frac must be in (0, 1)")
        for name in ("frames_dir", "transformers_csv", "outages_csv", "stations_csv", "strikes_csv",
                     "rfc_params_file", "mlp_params_file"):
            p = getattr(self, name)
            if p is not None and not os.path.exists(p):
                raise ConfigError(f"{name}: {p} does not exist")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path) as f:
                d = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def hash(self) -> str:
        d = asdict(self)
        d.pop("out_dir")
        d.pop("n_jobs")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # resolved paths
    def path(self, *parts) -> str:
        return os.path.join(self.out_dir, *parts)

    def frames_path(self) -> str:
        return self.frames_dir or self.path("frames")

    def ground_path(self, name) -> str:
        explicit = getattr(self, f"{name}_csv")
        return explicit or self.path("ground", f"{name}.csv")


# -- artifact helpers --------------------------------------------------------------

def meta(cfg: PipelineConfig, kind: str) -> dict:
    return {"schema_version": SCHEMA_VERSION, "config_hash": cfg.hash(), "artifact": kind}


def _write_json(path, obj):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=1)
        f.write("\n")


def _write_jsonl(path, header: dict, records):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        f.write(json.dumps({"_meta": header}, sort_keys=True) + "\n")
        for r in records:
            f.write(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n")


def _read_jsonl(path):
    with open(path) as f:
        lines = [json.loads(ln) for ln in f if ln.strip()]
    return [r for r in lines if "_meta" not in r]


def _write_csv(path, cfg, kind, header, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    buf = io.StringIO()
    m = meta(cfg, kind)
    buf.write(f"# schema_version={m['schema_version']} config_hash={m['config_hash']} artifact={kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    with open(path, "w", newline="") as f:
        f.write(buf.getvalue())


def _read_csv(path):
    if not os.path.exists(path):
        raise DataError(f"missing input file {path}")
    with open(path, newline="") as f:
        return list(csv.DictReader(ln for ln in f if not ln.startswith("#")))


def _opt(v):
    return None if v in ("", None) else float(v)


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_ground(cfg, transformers, outages, observations, strikes):
    _write_csv(cfg.path("ground", "transformers.csv"), cfg, "transformers", ["node_id", "x", "y"],
               [[t.node_id, repr(t.location[0]), repr(t.location[1])] for t in transformers])
    _write_csv(cfg.path("ground", "outages.csv"), cfg, "outages", ["node_id", "start", "end"],
               [[o.node_id, o.start, o.end] for o in outages])
    obs_cols = ["temperature", "wind_speed", "wind_gust", "pressure", "precipitation_intensity", "snow_depth"]
    _write_csv(cfg.path("ground", "stations.csv"), cfg, "stations", ["x", "y", "timestamp"] + obs_cols,
               [[repr(o.location[0]), repr(o.location[1]), o.timestamp] + [_fmt(getattr(o, c)) for c in obs_cols]
                for o in observations])
    _write_csv(cfg.path("ground", "strikes.csv"), cfg, "strikes", ["x", "y", "timestamp", "peak_current_ka"],
               [[repr(s.location[0]), repr(s.location[1]), s.timestamp, repr(s.peak_current_ka)] for s in strikes])


def read_transformers(path):
    return [TransformerNode(r["node_id"], (float(r["x"]), float(r["y"]))) for r in _read_csv(path)]


def read_outages(path):
    return [OutageRecord(r["node_id"], int(r["start"]), int(r["end"])) for r in _read_csv(path)]


def read_observations(path):
    cols = ["temperature", "wind_speed", "wind_gust", "pressure", "precipitation_intensity", "snow_depth"]
    return [WeatherObservation((float(r["x"]), float(r["y"])), int(r["timestamp"]), *[_opt(r[c]) for c in cols])
            for r in _read_csv(path)]


def read_strikes(path):
    return [LightningStrike((float(r["x"]), float(r["y"])), int(r["timestamp"]), float(r["peak_current_ka"]))
            for r in _read_csv(path)]


def _feature_collection(cfg, kind, feats):
    return {"type": "FeatureCollection", "metadata": meta(cfg, kind), "features": feats}


# -- stages --------------------------------------------------------------------------

def scene_config(cfg: PipelineConfig) -> SyntheticSceneConfig:
    if cfg.scene and cfg.scene.get("storms"):
        sc = SyntheticSceneConfig.from_dict(cfg.scene)
    else:
        extra = dict(cfg.scene or {})
        extra.pop("storms", None)
        extra.pop("seed", None)
        n = extra.pop("n_storms", cfg.scene_storms)
        sc = random_scene_config(cfg.seed, n_storms=n, **extra)
    return sc


def run_generate(cfg: PipelineConfig):
    sc_cfg = scene_config(cfg)
    scene = generate_synthetic_sequence(sc_cfg)
    write_frames(scene.frames, cfg.path("frames"))
    write_ground(cfg, scene.transformers, scene.outages, scene.observations, scene.strikes)
    truth = [
        {
            "storm": t.storm, "step": t.step, "timestamp": t.timestamp,
            "center": [round(c, 3) for c in t.center], "outage_share": t.outage_share,
            "n_transformers_under": t.n_transformers_under,
            "pixel_runs": cells_mod.encode_runs(t.pixels) if len(t.pixels) else [],
        }
        for t in scene.truth
    ]
    _write_json(cfg.path("truth.json"), {"metadata": meta(cfg, "truth"), "scene": sc_cfg.to_dict(), "truth": truth})
    log.info("generated %d frames, %d outages", len(scene.frames), len(scene.outages))
    return scene


def _load_frames(cfg):
    path = cfg.frames_path()
    if not os.path.isdir(path):
        raise DataError(f"frame directory {path} does not exist")
    try:
        frames = read_frames(path)
        check_sequence(frames)
    except FrameFormatError as e:
        raise DataError(str(e)) from e
    return frames


def run_detect(cfg: PipelineConfig):
    frames = _load_frames(cfg)
    if not frames:
        log.warning("no frames found in %s", cfg.frames_path())
    cell_feats, cluster_feats = [], []
    per_frame = []
    for fr in frames:
        cs = cells_mod.identify_cells(fr, cfg.threshold_dbz)
        clusters, noise = gdbscan(cs, cfg.radius_km, cfg.min_area_km2)
        per_frame.append((fr, cs, clusters, noise))
        cell_feats += [cell_feature(c) for c in cs]
        cluster_feats += [cluster_feature(c) for c in clusters]
    _write_json(cfg.path("detect", "cells.geojson"), _feature_collection(cfg, "cells", cell_feats))
    _write_json(cfg.path("detect", "clusters.geojson"), _feature_collection(cfg, "clusters", cluster_feats))
    return per_frame


def _load_detections(cfg, frames):
    try:
        with open(cfg.path("detect", "cells.geojson")) as f:
            cell_fc = json.load(f)
        with open(cfg.path("detect", "clusters.geojson")) as f:
            cl_fc = json.load(f)
    except OSError as e:
        raise DataError(f"detect artifacts missing: {e}") from e
    geo = frames[0].geo if frames else None
    cells_by_ts: dict[int, dict] = {}
    for feat in cell_fc["features"]:
        c = cell_from_feature(feat, geo)
        cells_by_ts.setdefault(c.timestamp, {})[c.cell_id] = c
    clusters_by_ts: dict[int, list] = {}
    for feat in cl_fc["features"]:
        ts = feat["properties"]["timestamp"]
        clusters_by_ts.setdefault(ts, []).append(cluster_from_feature(feat, cells_by_ts.get(ts, {})))
    out = []
    for fr in frames:
        cs = sorted(cells_by_ts.get(fr.timestamp, {}).values(), key=lambda c: c.cell_id)
        cls_ = sorted(clusters_by_ts.get(fr.timestamp, []), key=lambda c: c.cluster_id)
        members = {id(c) for cl in cls_ for c in cl.cells}
        out.append((cs, cls_, [c for c in cs if id(c) not in members]))
    return out


def tracker_config(cfg: PipelineConfig) -> TrackerConfig:
    return TrackerConfig(cfg.threshold_dbz, cfg.radius_km, cfg.min_area_km2, cfg.overlap_frac,
                         kalman=KalmanConfig(q=cfg.kalman_q, r=cfg.kalman_r))


def run_track(cfg: PipelineConfig):
    frames = _load_frames(cfg)
    detected = _load_detections(cfg, frames)
    tracker = Tracker(tracker_config(cfg))
    records, feats, results = [], [], []
    for fr, det in zip(frames, detected):
        res = tracker.step(fr, det)
        results.append(res)
        for cl, tr in res.track_records:
            records.append(track_record(cl, tr))
            feats.append(cluster_feature(cl))
    _write_json(cfg.path("track", "clusters_tracked.geojson"), _feature_collection(cfg, "clusters_tracked", feats))
    _write_jsonl(cfg.path("track", "tracks.jsonl"), meta(cfg, "tracks"), records)
    return results


class _TrackAge:
    def __init__(self, first_timestamp):
        self.first_timestamp = first_timestamp

    def age_at(self, t):
        return max(0.0, (t - self.first_timestamp) / 60.0)


def _load_tracked(cfg, frames):
    detected = _load_detections(cfg, frames)
    try:
        with open(cfg.path("track", "clusters_tracked.geojson")) as f:
            fc = json.load(f)
        records = _read_jsonl(cfg.path("track", "tracks.jsonl"))
    except OSError as e:
        raise DataError(f"track artifacts missing: {e}") from e
    ids = {(ft["properties"]["timestamp"], ft["properties"]["cluster_id"]): ft["properties"] for ft in fc["features"]}
    rec = {(r["timestamp"], r["cluster_id"]): r for r in records}
    out = []
    for fr, (cs, clusters, _) in zip(frames, detected):
        for cl in clusters:
            p = ids[(fr.timestamp, cl.cluster_id)]
            cl.track_id, cl.parent_track_id = p["track_id"], p["parent_track_id"]
            out.append((fr, cl, rec[(fr.timestamp, cl.cluster_id)]))
    return out


def build_samples(cfg: PipelineConfig, tracked, transformers, outages, observations, strikes):
    index = OutageIndex(transformers, outages)
    samples = []
    for fr, cl, rec in tracked:
        buf = buffer_geometry(cl.geometry, cfg.buffer_degrees, fr.geo)
        fv = extract_features(cl, _TrackAge(rec["first_timestamp"]), fr, observations, strikes, buf)
        share, _ = index.share(buf, fr.timestamp)
        samples.append(LabeledSample(cl.track_id, fr.timestamp, fv, class_from_share(share), share))
    return samples


def run_featurize(cfg: PipelineConfig):
    frames = _load_frames(cfg)
    tpath = cfg.ground_path("transformers")
    if not os.path.exists(tpath):
        raise DataError(f"transformer file {tpath} missing; labels cannot be assigned")
    transformers = read_transformers(tpath)
    outages = read_outages(cfg.ground_path("outages"))
    spath, lpath = cfg.ground_path("stations"), cfg.ground_path("strikes")
    observations = read_observations(spath) if os.path.exists(spath) else None
    strikes = read_strikes(lpath) if os.path.exists(lpath) else None
    tracked = _load_tracked(cfg, frames)
    samples = build_samples(cfg, tracked, transformers, outages, observations, strikes)
    ds = impute_missing(Dataset.from_samples(samples))
    hdr = f"schema_version={SCHEMA_VERSION} config_hash={cfg.hash()} artifact=dataset"
    os.makedirs(cfg.path("dataset"), exist_ok=True)
    write_dataset_csv(ds, cfg.path("dataset", "dataset.csv"), hdr)
    write_dataset_csv(filter_complete(ds), cfg.path("dataset", "dataset_filt.csv"), hdr.replace("dataset", "dataset_filt"))
    return ds


def _dataset_path(cfg):
    return cfg.path("dataset", "dataset_filt.csv" if cfg.data == "filtered" else "dataset.csv")


def _split_hash(ds: Dataset, idx) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(idx, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(ds.X[idx]).tobytes())
    h.update(np.asarray(ds.y[idx], dtype=np.int64).tobytes())
    return h.hexdigest()


def rfc_hyperparams(cfg: PipelineConfig) -> RfcHyperparams:
    d = {"seed": cfg.seed}
    if cfg.rfc_params_file:
        with open(cfg.rfc_params_file) as f:
            d.update(json.load(f))
    d.update(cfg.rfc)
    try:
        return RfcHyperparams(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"random forest hyperparameters: {e}") from e


def mlp_config(cfg: PipelineConfig) -> MlpConfig:
    d = {"seed": cfg.seed}
    if cfg.mlp_params_file:
        with open(cfg.mlp_params_file) as f:
            d.update(json.load(f))
    d.update(cfg.mlp)
    try:
        return MlpConfig(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"network hyperparameters: {e}") from e


def run_train(cfg: PipelineConfig):
    path = _dataset_path(cfg)
    if not os.path.exists(path):
        raise DataError(f"dataset {path} missing; run featurize first")
    ds = read_dataset_csv(path)
    if len(ds) < 2 or len(np.unique(ds.y)) < 2:
        raise DataError(f"{path}: need at least 2 rows and 2 classes to train, got {len(ds)} rows, classes {np.unique(ds.y).tolist()}")
    X = np.where(ds.missing, 0.0, ds.X)
    train_idx, val_idx = train_val_split(len(ds), cfg.train_frac, cfg.seed, ds.y if cfg.stratified else None)
    val_hash = _split_hash(ds, val_idx)
    try:
        sm = smote_oversample(X[train_idx], ds.y[train_idx], SmoteConfig(k=cfg.smote_k, seed=cfg.seed))
    except SamplingError as e:
        raise DataError(str(e)) from e
    # provenance in dataset row numbers
    _write_csv(cfg.path("train", "smote_provenance.csv"), cfg, "smote_provenance",
               ["synthetic_row", "class", "parent_row", "neighbor_row", "lambda"],
               [[sm.n_original + i, int(sm.y[sm.n_original + i]), int(train_idx[p]), int(train_idx[q]), repr(float(l))]
                for i, (p, q, l) in enumerate(zip(sm.parent, sm.neighbor, sm.lam))])
    extra = meta(cfg, "model")
    trained = {}
    if cfg.model in ("rfc", "both"):
        hp = rfc_hyperparams(cfg)
        if cfg.random_search_iter > 0:
            def balance(Xt, yt):
                r = smote_oversample(Xt, yt, SmoteConfig(k=cfg.smote_k, seed=cfg.seed))
                return r.X, r.y
            hp, results = random_search_cv(X[train_idx], ds.y[train_idx], n_iter=cfg.random_search_iter,
                                           folds=cfg.random_search_folds, seed=cfg.seed, fit_transform=balance,
                                           n_jobs=cfg.n_jobs)
            _write_json(cfg.path("train", "random_search.json"), {
                "metadata": meta(cfg, "random_search"),
                "candidates": [{"hyperparams": asdict(h), "fold_f1_macro": s, "mean_f1_macro": m} for h, s, m in results],
                "best": asdict(hp),
            })
        model = fit_forest(sm.X, sm.y, hp, n_jobs=cfg.n_jobs)
        model.save(cfg.path("train", "rfc_model.json"), extra)
        trained["rfc"] = model
    if cfg.model in ("mlp", "both"):
        mcfg = mlp_config(cfg)
        params, hist = train_mlp(sm.X, sm.y, mcfg, X[val_idx], ds.y[val_idx])
        model = MlpModel(mcfg, params)
        model.save(cfg.path("train", "mlp_model.json"), extra)
        hist.to_csv(cfg.path("train", "mlp_history.csv"))
        trained["mlp"] = model
    if _split_hash(ds, val_idx) != val_hash:
        raise DataError("validation split changed during training")
    leak = set(train_idx[np.concatenate([sm.parent, sm.neighbor])].tolist()) & set(val_idx.tolist())
    if leak:
        raise DataError(f"validation rows used by SMOTE: {sorted(leak)[:5]}")
    _write_json(cfg.path("train", "split.json"), {
        "metadata": meta(cfg, "split"), "dataset": os.path.basename(path),
        "train_rows": train_idx.tolist(), "val_rows": val_idx.tolist(), "val_hash": val_hash,
    })
    return trained


def load_model(path):
    try:
        with open(path) as f:
            d = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ModelError(f"cannot load model {path}: {e}") from e
    meta_ = d.get("meta", {})
    if meta_.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ModelError(f"{path}: schema version {meta_.get('schema_version')} != {SCHEMA_VERSION}")
    try:
        if d.get("kind") == "random_forest":
            return RandomForestModel.from_dict(d)
        if d.get("kind") == "mlp":
            return MlpModel.from_dict(d)
    except (KeyError, ValueError, TypeError) as e:
        raise ModelError(f"{path}: {e}") from e
    raise ModelError(f"{path}: unknown model kind {d.get('kind')!r}")


def _models(cfg):
    names = ["rfc", "mlp"] if cfg.model == "both" else [cfg.model]
    out = {}
    for n in names:
        p = cfg.path("train", f"{n}_model.json")
        if not os.path.exists(p):
            raise ModelError(f"model {p} missing; run train first")
        out[n] = load_model(p)
    return out


METRIC_ROWS = [
    ("Accuracy", "accuracy"), ("AUC", "auc_macro"),
    ("Precision micro average", "precision_micro"), ("Precision macro average", "precision_macro"),
    ("Recall micro average", "recall_micro"), ("Recall macro average", "recall_macro"),
    ("F1 score micro average", "f1_micro"), ("F1 score macro average", "f1_macro"),
]


def run_evaluate(cfg: PipelineConfig):
    try:
        with open(cfg.path("train", "split.json")) as f:
            split = json.load(f)
    except OSError as e:
        raise DataError(f"split file missing; run train first ({e})") from e
    ds = read_dataset_csv(cfg.path("dataset", split["dataset"]))
    val = np.asarray(split["val_rows"], dtype=np.int64)
    if _split_hash(ds, val) != split["val_hash"]:
        raise DataError("validation rows differ from those recorded at training time")
    X = np.where(ds.missing, 0.0, ds.X)[val]
    y = ds.y[val]
    reports = {}
    for name, model in _models(cfg).items():
        proba = model.predict_proba(X)
        pred = np.argmax(proba, axis=1)
        rep = classification_metrics(y, pred, proba=proba, f1_formula=cfg.f1_formula)
        reports[name] = rep
        d = rep.to_dict()
        d["table"] = [[label, d[key]] for label, key in METRIC_ROWS]  # ordered rows
        d["metadata"] = meta(cfg, f"{name}_metrics")
        _write_json(cfg.path("eval", f"{name}_metrics.json"), d)
        with open(cfg.path("eval", f"{name}_metrics.txt"), "w") as f:
            f.write(rep.to_text(f"{name.upper()} ({cfg.data} data, {len(y)} validation samples)"))
        _write_csv(cfg.path("eval", f"{name}_confusion.csv"), cfg, "confusion",
                   ["true_class", "pred_class", "count", "normalized"],
                   [[i, j, rep.confusion_counts[i][j], repr(rep.confusion_normalized[i][j])]
                    for i in range(4) for j in range(4)])
        rows = []
        for k in range(4):
            rows += [[k, repr(r), repr(p)] for r, p in pr_curve(y, proba, k)]
        _write_csv(cfg.path("eval", f"{name}_pr_curves.csv"), cfg, "pr_curve", ["class", "recall", "precision"], rows)
    return reports


def predict_rows(model, X: np.ndarray, chunk: int = 65536) -> np.ndarray:
    return np.vstack([model.predict_proba(X[a:a + chunk]) for a in range(0, max(len(X), 1), chunk)]) if len(X) else np.zeros((0, 4))


def run_predict(cfg: PipelineConfig, model_name: str | None = None):
    """Classify every tracked cluster at each of its 24 nowcast positions."""
    frames = _load_frames(cfg)
    models = _models(cfg)
    name = model_name or ("rfc" if "rfc" in models else next(iter(models)))
    model = models[name]
    ds = read_dataset_csv(cfg.path("dataset", "dataset.csv"))
    tracked = _load_tracked(cfg, frames)
    if len(tracked) != len(ds):
        raise DataError("dataset rows do not match tracked clusters; rerun featurize")
    X = np.where(ds.missing, 0.0, ds.X)
    rows, meta_rows = [], []
    for i, (fr, cl, rec) in enumerate(tracked):
        cx, cy = cl.centroid
        for k, (t, x, y) in enumerate(rec["nowcast"]):
            row = X[i].copy()
            lat, lon = fr.geo.world_to_latlon(x, y)
            row[0], row[1] = lat, lon  # location moves, observations keep last-known values
            rows.append(row)
            meta_rows.append((i, k, t, x, y, x - cx, y - cy))
    P = predict_rows(model, np.array(rows).reshape(-1, len(SLOTS)))
    records = []
    for (i, k, t, x, y, dx, dy), p in zip(meta_rows, P):
        fr, cl, rec = tracked[i]
        geom = shapely.set_precision(affinity.translate(cl.geometry, dx, dy), 1e-3)
        records.append({
            "track_id": cl.track_id, "issued": fr.timestamp, "lead_minutes": (k + 1) * FRAME_INTERVAL_S // 60,
            "valid_time": t, "centroid": [round(x, 3), round(y, 3)], "geometry": mapping(geom),
            "predicted_class": int(np.argmax(p)), "probabilities": [round(float(v), 6) for v in p],
        })
    _write_jsonl(cfg.path("predict", f"predictions_{name}.jsonl"), meta(cfg, "predictions"), records)
    return records


def run_all(cfg: PipelineConfig):
    if cfg.frames_dir is None:
        run_generate(cfg)
    run_detect(cfg)
    run_track(cfg)
    run_featurize(cfg)
    run_train(cfg)
    reports = run_evaluate(cfg)
    run_predict(cfg)
    return reports
