"""Per-cluster feature vectors and damage-class labels."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import shapely

from .grid import FRAME_INTERVAL_S, RadarFrame

SCHEMA_VERSION = 1

SLOTS = (
    "center_lat",
    "center_lon",
    "area_km2",
    "age_minutes",
    "dbz_max",
    "dbz_mean",
    "dbz_std",
    "temperature",
    "wind_speed",
    "wind_gust",
    "pressure",
    "precipitation_intensity",
    "snow_depth",
    "lightning_count",
    "lightning_peak_current_max",
    "cell_count",
)
N_FEATURES = len(SLOTS)
SLOT_INDEX = {name: i for i, name in enumerate(SLOTS)}
OBS_SLOTS = SLOTS[7:13]
N_CLASSES = 4

# upper share bound (inclusive) of classes 1 and 2; above the last is class 3
CLASS_EDGES = (0.10, 0.50)


@dataclass(frozen=True)
class WeatherObservation:
    location: tuple[float, float]
    timestamp: int
    temperature: float | None = None
    wind_speed: float | None = None
    wind_gust: float | None = None
    pressure: float | None = None
    precipitation_intensity: float | None = None
    snow_depth: float | None = None

    def __post_init__(self):
        if self.snow_depth is not None and self.snow_depth < 0:
            raise ValueError("snow_depth must be >= 0")
        if self.wind_speed is not None and self.wind_speed < 0:
            raise ValueError("wind_speed must be >= 0")


@dataclass(frozen=True)
class LightningStrike:
    location: tuple[float, float]
    timestamp: int
    peak_current_ka: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.location)):
            raise ValueError("lightning strike location must be finite")


@dataclass(frozen=True)
class TransformerNode:
    node_id: str
    location: tuple[float, float]


@dataclass(frozen=True)
class OutageRecord:
    node_id: str
    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"outage on {self.node_id}: start {self.start} not before end {self.end}")


@dataclass
class FeatureVector:
    values: np.ndarray  # (16,), NaN where missing
    missing: np.ndarray  # (16,) bool

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.values.shape != (N_FEATURES,) or self.missing.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} slots")

    def __getitem__(self, name):
        return self.values[SLOT_INDEX[name]]

    def as_dict(self):
        return {n: (None if m else float(v)) for n, v, m in zip(SLOTS, self.values, self.missing)}


@dataclass
class Dataset:
    """Column-oriented collection of labeled samples."""

    X: np.ndarray
    missing: np.ndarray
    y: np.ndarray
    outage_share: np.ndarray
    track_id: np.ndarray
    timestamp: np.ndarray

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(
            self.X[idx], self.missing[idx], self.y[idx], self.outage_share[idx], self.track_id[idx], self.timestamp[idx]
        )

    @classmethod
    def empty(cls) -> "Dataset":
        return cls(
            np.zeros((0, N_FEATURES)), np.zeros((0, N_FEATURES), bool), np.zeros(0, np.int64),
            np.zeros(0), np.zeros(0, dtype=object), np.zeros(0, np.int64),
        )

    @classmethod
    def from_samples(cls, samples) -> "Dataset":
        if not samples:
            return cls.empty()
        return cls(
            X=np.array([s.features.values for s in samples]),
            missing=np.array([s.features.missing for s in samples]),
            y=np.array([s.class_label for s in samples], dtype=np.int64),
            outage_share=np.array([s.outage_share for s in samples]),
            track_id=np.array([s.track_id for s in samples], dtype=object),
            timestamp=np.array([s.timestamp for s in samples], dtype=np.int64),
        )


@dataclass
class LabeledSample:
    track_id: str
    timestamp: int
    features: FeatureVector
    class_label: int
    outage_share: float

    def __post_init__(self):
        if class_from_share(self.outage_share) != self.class_label:
            raise ValueError(f"class {self.class_label} inconsistent with outage share {self.outage_share}")


# -- labeling -------------------------------------------------------------------

def class_from_share(share):
    """Damage class: 0 for no outage, then (0, 0.1], (0.1, 0.5], (0.5, 1]."""
    s = np.asarray(share, dtype=float)
    cls_ = np.where(s <= 0.0, 0, np.where(s <= CLASS_EDGES[0], 1, np.where(s <= CLASS_EDGES[1], 2, 3)))
    return int(cls_) if cls_.ndim == 0 else cls_.astype(np.int64)


class OutageIndex:
    """Transformer locations plus outage intervals, queried by geometry and time."""

    def __init__(self, transformers, outages):
        self.ids = [t.node_id for t in transformers]
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("transformer node ids must be unique")
        self.xy = np.array([t.location for t in transformers], dtype=float).reshape(-1, 2)
        pos = {nid: i for i, nid in enumerate(self.ids)}
        self._starts = [[] for _ in self.ids]
        self._ends = [[] for _ in self.ids]
        for o in outages:
            i = pos.get(o.node_id)
            if i is None:
                continue
            self._starts[i].append(o.start)
            self._ends[i].append(o.end)
        self._starts = [np.array(s) for s in self._starts]
        self._ends = [np.array(e) for e in self._ends]

    def inside(self, geom) -> np.ndarray:
        if len(self.xy) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(shapely.contains_xy(geom, self.xy[:, 0], self.xy[:, 1]))

    def out_during(self, i: int, t0: int, t1: int) -> bool:
        s, e = self._starts[i], self._ends[i]
        return bool(np.any((s < t1) & (e > t0)))

    def share(self, geom, t: int) -> tuple[float, int]:
        inside = self.inside(geom)
        if len(inside) == 0:
            return 0.0, 0
        hit = sum(self.out_during(i, t, t + FRAME_INTERVAL_S) for i in inside)
        return hit / len(inside), len(inside)


def assign_label(buffered_geom, transformers, outages, t: int) -> tuple[int, float]:
    """Damage class and outage share of the transformers under ``buffered_geom``.

    ``transformers`` may be an :class:`OutageIndex` (``outages`` is then ignored)
    to avoid rebuilding the lookup per call.
    """
    index = transformers if isinstance(transformers, OutageIndex) else OutageIndex(transformers, outages)
    share, _ = index.share(buffered_geom, t)
    return class_from_share(share), share


# -- feature extraction -----------------------------------------------------------

def _in_geom(geom, pts):
    if not pts:
        return []
    xy = np.array([p.location for p in pts], dtype=float)
    hit = shapely.contains_xy(geom, xy[:, 0], xy[:, 1])
    return [p for p, h in zip(pts, hit) if h]


def aggregate_observations(buffered_geom, observations, t: int, window_s: int = FRAME_INTERVAL_S):
    """Mean of each observed variable over stations inside the geometry.

    Each station contributes its observation nearest to ``t`` within
    ``window_s``. Returns six values, ``None`` where nothing was observed.
    """
    near = [o for o in observations if abs(o.timestamp - t) <= window_s]
    near = _in_geom(buffered_geom, near)
    best = {}
    for o in near:
        key = o.location
        if key not in best or abs(o.timestamp - t) < abs(best[key].timestamp - t):
            best[key] = o
    out = []
    for name in OBS_SLOTS:
        vals = [getattr(o, name) for o in best.values() if getattr(o, name) is not None]
        out.append(float(np.mean(vals)) if vals else None)
    return out


def extract_features(cluster, track, frame: RadarFrame, observations, strikes, buffered_geom=None,
                     buffer_degrees: float = 0.1) -> FeatureVector:
    """16-slot feature vector of ``cluster`` at its timestamp.

    ``observations`` / ``strikes`` set to ``None`` mean the source is absent
    (missing slots); an empty list means the source reported nothing.
    """
    from .cells import buffer_geometry

    t = cluster.timestamp
    if buffered_geom is None:
        buffered_geom = buffer_geometry(cluster.geometry, buffer_degrees, frame.geo)
    vals = np.full(N_FEATURES, np.nan)

    lat, lon = frame.geo.world_to_latlon(*cluster.centroid) if frame.geo.anchor_latlon else (np.nan, np.nan)
    vals[0], vals[1] = lat, lon
    vals[2] = cluster.total_area_km2
    if track is not None:
        vals[3] = track.age_at(t)
    pix = cluster.pixels
    dbz = frame.values[pix[:, 0], pix[:, 1]]
    dbz = dbz[~np.isnan(dbz)]
    if len(dbz):
        vals[4], vals[5], vals[6] = dbz.max(), dbz.mean(), dbz.std()

    if observations is not None:
        for k, v in enumerate(aggregate_observations(buffered_geom, observations, t)):
            if v is not None:
                vals[7 + k] = v

    if strikes is not None:
        hits = [s for s in strikes if t <= s.timestamp < t + FRAME_INTERVAL_S]
        hits = _in_geom(buffered_geom, hits)
        vals[13] = len(hits)
        vals[14] = max((s.peak_current_ka for s in hits), default=0.0)

    vals[15] = len(cluster.members)
    return FeatureVector(vals, np.isnan(vals))


# -- dataset transforms -------------------------------------------------------------

def impute_missing(ds: Dataset) -> Dataset:
    X = np.where(ds.missing, 0.0, ds.X)
    return Dataset(X, ds.missing.copy(), ds.y, ds.outage_share, ds.track_id, ds.timestamp)


def filter_complete(ds: Dataset) -> Dataset:
    return ds.subset(np.flatnonzero(~ds.missing.any(axis=1)))


# -- CSV ----------------------------------------------------------------------------

CSV_COLUMNS = ("track_id", "timestamp") + SLOTS + ("missing_mask", "outage_share", "class")


def mask_to_hex(row_missing) -> str:
    bits = sum(1 << i for i, m in enumerate(row_missing) if m)
    return f"{bits:04x}"


def hex_to_mask(s: str) -> np.ndarray:
    bits = int(s, 16)
    return np.array([(bits >> i) & 1 for i in range(N_FEATURES)], dtype=bool)


def _fmt(v) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_dataset_csv(ds: Dataset, path, header_comment: str | None = None) -> None:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i in range(len(ds)):
        w.writerow(
            [ds.track_id[i], int(ds.timestamp[i])]
            + [_fmt(v) for v in ds.X[i]]
            + [mask_to_hex(ds.missing[i]), repr(float(ds.outage_share[i])), int(ds.y[i])]
        )
    with open(path, "w", newline="") as f:
        f.write(buf.getvalue())


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        return Dataset.empty()
    header, body = rows[0], rows[1:]
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected dataset columns")
    if not body:
        return Dataset.empty()
    X = np.array([[float(v) if v != "" else np.nan for v in r[2:2 + N_FEATURES]] for r in body])
    missing = np.array([hex_to_mask(r[2 + N_FEATURES]) for r in body])
    return Dataset(
        X=X,
        missing=missing,
        y=np.array([int(r[-1]) for r in body], dtype=np.int64),
        outage_share=np.array([float(r[-2]) for r in body]),
        track_id=np.array([r[0] for r in body], dtype=object),
        timestamp=np.array([int(r[1]) for r in body], dtype=np.int64),
    )
