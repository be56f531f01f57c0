"""Seeded synthetic radar scenes and labeled tables.

Storms are Gaussian reflectivity bumps advected at constant velocity over a
weak noisy background. Alongside the frames the generator plants transformer
outages, weather station observations and lightning strikes, and records the
ground truth every downstream stage is checked against.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .cells import DBZ_THRESHOLD, buffer_geometry, pixels_to_polygon
from .grid import DBZ_MAX, DBZ_MIN, FRAME_INTERVAL_S, GeoTransform, RadarFrame

log = logging.getLogger(__name__)

# class counts of the original (pre-SMOTE) data set
REFERENCE_CLASS_COUNTS = (872_801, 5_183, 4_538, 3_499)


class ConfigError(ValueError):
    pass


@dataclass
class StormDescriptor:
    center: tuple[float, float]  # world meters at the birth step
    peak_dbz: float = 50.0
    radius_km: float = 4.0  # Gaussian sigma
    velocity: tuple[float, float] = (0.0, 0.0)  # m/s, (east, north)
    birth: int = 0
    death: int | None = None  # exclusive; None = lives to the end
    outage_fraction: float = 0.0
    lightning_rate: float = 0.0  # expected strikes per step

    @property
    def harmful(self) -> bool:
        return self.peak_dbz >= DBZ_THRESHOLD

    def alive(self, step: int) -> bool:
        return step >= self.birth and (self.death is None or step < self.death)

    def position(self, step: int) -> tuple[float, float]:
        dt = (step - self.birth) * FRAME_INTERVAL_S
        return self.center[0] + self.velocity[0] * dt, self.center[1] + self.velocity[1] * dt


@dataclass
class SyntheticSceneConfig:
    seed: int = 0
    duration_steps: int = 24
    width: int = 512
    height: int = 512
    pixel_size: float = 250.0
    anchor_latlon: tuple[float, float] = (62.0, 26.0)
    start_timestamp: int = 1_500_000_000  # 2017-07-14T02:40:00Z
    background_dbz: float = 5.0
    background_noise: float = 1.0
    storms: list[StormDescriptor] = field(default_factory=list)
    n_transformers: int = 3000
    transformers: list[tuple[float, float]] | None = None  # explicit layout overrides n_transformers
    outage_duration_s: tuple[int, int] = (60, 900)
    n_stations: int = 40
    station_capability: float = 0.8  # probability a station measures a given variable

    def __post_init__(self):
        self.storms = [s if isinstance(s, StormDescriptor) else StormDescriptor(**s) for s in self.storms]

    @property
    def geo(self) -> GeoTransform:
        return GeoTransform(0.0, self.height * self.pixel_size, self.pixel_size, tuple(self.anchor_latlon))

    def validate(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"grid must be non-empty, got {self.width}x{self.height}")
        if self.duration_steps < 0:
            raise ConfigError("duration_steps must be >= 0")
        for i, s in enumerate(self.storms):
            if not np.all(np.isfinite(s.velocity)) or not np.all(np.isfinite(s.center)):
                raise ConfigError(f"storm {i}: non-finite center or velocity")
            if s.radius_km <= 0:
                raise ConfigError(f"storm {i}: radius_km must be positive")
            if not 0.0 <= s.outage_fraction <= 1.0:
                raise ConfigError(f"storm {i}: outage_fraction outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSceneConfig":
        d = dict(d)
        for key in ("anchor_latlon", "outage_duration_s"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        if d.get("transformers") is not None:
            d["transformers"] = [tuple(t) for t in d["transformers"]]
        storms = []
        for s in d.pop("storms", []):
            s = dict(s)
            s["center"] = tuple(s["center"])
            s["velocity"] = tuple(s.get("velocity", (0.0, 0.0)))
            storms.append(StormDescriptor(**s))
        return cls(storms=storms, **d)

    @classmethod
    def load(cls, path) -> "SyntheticSceneConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class StormTruth:
    storm: int
    step: int
    timestamp: int
    center: tuple[float, float]  # planted (continuous) position
    pixels: np.ndarray  # (n, 2) (row, col) support at or above threshold
    outage_share: float
    n_transformers_under: int


@dataclass
class SyntheticScene:
    frames: list[RadarFrame]
    truth: list[StormTruth]
    transformers: list  # TransformerNode
    outages: list  # OutageRecord
    observations: list  # WeatherObservation
    strikes: list  # LightningStrike

    def truth_at(self, step: int) -> list[StormTruth]:
        return [t for t in self.truth if t.step == step]


def _render(cfg: SyntheticSceneConfig, step: int, rng: np.random.Generator, xx, yy):
    bg = cfg.background_dbz + cfg.background_noise * rng.standard_normal((cfg.height, cfg.width))
    contribs = []
    ids = []
    for i, s in enumerate(cfg.storms):
        if not s.alive(step):
            continue
        cx, cy = s.position(step)
        sig = s.radius_km * 1000.0
        contribs.append(s.peak_dbz * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sig * sig)))
        ids.append(i)
    if contribs:
        stack = np.stack(contribs)
        owner = np.argmax(stack, axis=0)
        field_ = np.maximum(bg, stack.max(axis=0))
    else:
        owner = None
        field_ = bg
    out_of_range = (field_ < DBZ_MIN) | (field_ > DBZ_MAX)
    if out_of_range.any():
        log.warning("step %d: %d values outside [%g, %g] dBZ clipped", step, int(out_of_range.sum()), DBZ_MIN, DBZ_MAX)
        field_ = np.clip(field_, DBZ_MIN, DBZ_MAX)
    # quantize to the on-disk precision so written frames reload bit-identical
    field_ = np.round(field_, 2)
    return field_, owner, ids


def generate_synthetic_sequence(config: SyntheticSceneConfig) -> SyntheticScene:
    from .features import LightningStrike, OutageRecord, TransformerNode, WeatherObservation

    cfg = config
    cfg.validate()
    geo = cfg.geo
    ss = np.random.SeedSequence(cfg.seed)
    r_frames, r_grid, r_out, r_obs, r_ltg = (np.random.default_rng(s) for s in ss.spawn(5))

    cols = np.arange(cfg.width)
    rows = np.arange(cfg.height)
    xx = geo.origin_easting + (cols[None, :] + 0.5) * geo.pixel_size
    yy = geo.origin_northing - (rows[:, None] + 0.5) * geo.pixel_size
    ext_x, ext_y = cfg.width * cfg.pixel_size, cfg.height * cfg.pixel_size

    if cfg.transformers is not None:
        t_xy = np.asarray(cfg.transformers, dtype=float).reshape(-1, 2)
    else:
        t_xy = np.column_stack([r_grid.uniform(0, ext_x, cfg.n_transformers), r_grid.uniform(0, ext_y, cfg.n_transformers)])
    transformers = [TransformerNode(f"TR{i:05d}", (float(x), float(y))) for i, (x, y) in enumerate(t_xy)]

    s_xy = np.column_stack([r_grid.uniform(0, ext_x, cfg.n_stations), r_grid.uniform(0, ext_y, cfg.n_stations)])
    capable = r_grid.random((cfg.n_stations, 6)) < cfg.station_capability
    station_temp = r_grid.normal(18.0, 3.0, cfg.n_stations)

    frames, supports = [], []
    for step in range(cfg.duration_steps):
        ts = cfg.start_timestamp + step * FRAME_INTERVAL_S
        values, owner, ids = _render(cfg, step, r_frames, xx, yy)
        frames.append(RadarFrame(ts, values, geo))
        mask = values >= DBZ_THRESHOLD
        for k, i in enumerate(ids):
            sel = mask & (owner == k)
            pix = np.argwhere(sel)
            supports.append((i, step, ts, pix))

    # plant outages: per storm and step, fail a fraction of the transformers
    # under its buffered support
    outages = []
    buffers = {}
    for i, step, ts, pix in supports:
        if len(pix) == 0:
            continue
        buf = buffer_geometry(pixels_to_polygon(pix, geo), geo=geo)
        buffers[(i, step)] = buf
        inside = np.flatnonzero(_contains(buf, t_xy))
        n_fail = int(round(cfg.storms[i].outage_fraction * len(inside)))
        if n_fail == 0:
            continue
        chosen = np.sort(r_out.choice(inside, size=n_fail, replace=False))
        lo, hi = cfg.outage_duration_s
        for j in chosen:
            start = ts + int(r_out.integers(0, FRAME_INTERVAL_S))
            end = start + int(r_out.integers(lo, hi + 1))
            outages.append(OutageRecord(transformers[j].node_id, start, end))

    # the planted share is the labeling rule evaluated on the generator's own geometry
    starts = {}
    for o in outages:
        starts.setdefault(o.node_id, []).append((o.start, o.end))
    truth = []
    for i, step, ts, pix in supports:
        share, n_in = 0.0, 0
        buf = buffers.get((i, step))
        if buf is not None:
            inside = np.flatnonzero(_contains(buf, t_xy))
            n_in = len(inside)
            hit = 0
            for j in inside:
                if any(s < ts + FRAME_INTERVAL_S and e > ts for s, e in starts.get(transformers[j].node_id, ())):
                    hit += 1
            share = hit / n_in if n_in else 0.0
        truth.append(StormTruth(i, step, ts, cfg.storms[i].position(step), pix, share, n_in))

    observations = []
    for step in range(cfg.duration_steps):
        ts = cfg.start_timestamp + step * FRAME_INTERVAL_S
        # storm influence on each station: nearest active storm's harm, fading with distance
        harm = np.zeros(cfg.n_stations)
        for s in cfg.storms:
            if not s.alive(step):
                continue
            cx, cy = s.position(step)
            d = np.hypot(s_xy[:, 0] - cx, s_xy[:, 1] - cy)
            w = np.exp(-(d / 15_000.0) ** 2) * (s.peak_dbz / 50.0)
            harm = np.maximum(harm, w * (0.3 + s.outage_fraction))
        for k in range(cfg.n_stations):
            vals = [
                station_temp[k] - 4.0 * harm[k] + r_obs.normal(0, 0.5),
                max(0.0, 4.0 + 12.0 * harm[k] + r_obs.normal(0, 1.0)),
                0.0,
                1010.0 - 6.0 * harm[k] + r_obs.normal(0, 1.0),
                max(0.0, 30.0 * harm[k] + r_obs.normal(0, 0.5)),
                0.0,
            ]
            vals[2] = vals[1] * (1.4 + 0.3 * harm[k]) + abs(r_obs.normal(0, 1.0))
            vals = [float(v) if capable[k, m] else None for m, v in enumerate(vals)]
            observations.append(WeatherObservation((float(s_xy[k, 0]), float(s_xy[k, 1])), ts, *vals))

    strikes = []
    for step in range(cfg.duration_steps):
        ts = cfg.start_timestamp + step * FRAME_INTERVAL_S
        for s in cfg.storms:
            if not s.alive(step) or s.lightning_rate <= 0:
                continue
            cx, cy = s.position(step)
            n = int(r_ltg.poisson(s.lightning_rate))
            for _ in range(n):
                x = cx + r_ltg.normal(0, s.radius_km * 1000.0)
                y = cy + r_ltg.normal(0, s.radius_km * 1000.0)
                strikes.append(LightningStrike((float(x), float(y)), ts + int(r_ltg.integers(0, FRAME_INTERVAL_S)), float(r_ltg.lognormal(3.0, 0.6))))

    return SyntheticScene(frames, truth, transformers, outages, observations, strikes)


def _contains(geom, xy: np.ndarray) -> np.ndarray:
    import shapely

    if len(xy) == 0:
        return np.zeros(0, dtype=bool)
    return shapely.contains_xy(geom, xy[:, 0], xy[:, 1])


def random_scene_config(
    seed: int,
    n_storms: int = 4,
    duration_steps: int = 24,
    width: int = 512,
    height: int = 512,
    pixel_size: float = 250.0,
    min_separation_km: float = 30.0,
    speed_range: tuple[float, float] = (3.0, 10.0),
    outage_fractions: tuple[float, ...] = (0.0, 0.05, 0.3, 0.7),
    **overrides,
) -> SyntheticSceneConfig:
    """Random scene whose storms stay at least ``min_separation_km`` apart while coexisting."""
    rng = np.random.default_rng(seed)
    ext_x, ext_y = width * pixel_size, height * pixel_size
    margin = 0.12
    storms: list[StormDescriptor] = []
    attempts = 0
    while len(storms) < n_storms:
        attempts += 1
        if attempts > 5000:
            raise ConfigError(f"could not place {n_storms} separated storms on a {width}x{height} grid")
        speed = rng.uniform(*speed_range)
        ang = rng.uniform(0, 2 * np.pi)
        vel = (speed * np.cos(ang), speed * np.sin(ang))
        birth = int(rng.integers(0, max(1, duration_steps // 3)))
        life = int(rng.integers(max(2, duration_steps // 2), duration_steps + 1))
        death = min(duration_steps, birth + life)
        # choose the midpoint of the trajectory inside the domain, then back out the birth position
        mid = (rng.uniform(margin, 1 - margin) * ext_x, rng.uniform(margin, 1 - margin) * ext_y)
        half = (death - birth - 1) / 2 * FRAME_INTERVAL_S
        start = (mid[0] - vel[0] * half, mid[1] - vel[1] * half)
        end = (mid[0] + vel[0] * half, mid[1] + vel[1] * half)
        inside = all(0.05 * e < c < 0.95 * e for p in (start, end) for c, e in zip(p, (ext_x, ext_y)))
        if not inside:
            continue
        cand = StormDescriptor(
            center=(float(start[0]), float(start[1])),
            peak_dbz=float(rng.uniform(47.0, 58.0)),
            radius_km=float(rng.uniform(3.5, 5.0)),
            velocity=(float(vel[0]), float(vel[1])),
            birth=birth,
            death=death,
            outage_fraction=float(outage_fractions[len(storms) % len(outage_fractions)]),
            lightning_rate=float(rng.uniform(0.0, 6.0)),
        )
        if all(_min_gap_km(cand, s, duration_steps) >= min_separation_km for s in storms):
            storms.append(cand)
    return SyntheticSceneConfig(
        seed=seed, duration_steps=duration_steps, width=width, height=height, pixel_size=pixel_size, storms=storms, **overrides
    )


def _min_gap_km(a: StormDescriptor, b: StormDescriptor, steps: int) -> float:
    gaps = [np.hypot(*(np.subtract(a.position(t), b.position(t)))) for t in range(steps) if a.alive(t) and b.alive(t)]
    return min(gaps) / 1000.0 if gaps else np.inf


# -- labeled tables ---------------------------------------------------------------

def class_counts_for(n: int, shares=REFERENCE_CLASS_COUNTS) -> np.ndarray:
    """Split ``n`` rows across classes in proportion to ``shares`` (largest remainder)."""
    shares = np.asarray(shares, dtype=float)
    exact = n * shares / shares.sum()
    counts = np.floor(exact).astype(int)
    rem = n - counts.sum()
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[:rem]] += 1
    return counts


def generate_labeled_table(n: int, seed: int = 0, shares=REFERENCE_CLASS_COUNTS, missing_rate: float = 0.03, separation: float = 1.5):
    """Tabular stand-in for the storm data set, skewed like the original class histogram.

    Class-conditional Gaussian features in the 16-slot schema; a share of rows
    has missing ground-observation slots.
    """
    from .features import N_FEATURES, OBS_SLOTS, SLOT_INDEX, Dataset, class_from_share

    rng = np.random.default_rng(seed)
    counts = class_counts_for(n, shares)
    y = np.repeat(np.arange(len(counts)), counts)
    rng.shuffle(y)
    means = rng.normal(0.0, separation, (len(counts), N_FEATURES))
    X = means[y] + rng.standard_normal((n, N_FEATURES))
    missing = np.zeros((n, N_FEATURES), dtype=bool)
    obs_cols = [SLOT_INDEX[s] for s in OBS_SLOTS]
    missing[:, obs_cols] = rng.random((n, len(obs_cols))) < missing_rate
    X[missing] = np.nan
    lo = np.array([0.0, 0.0, 0.1, 0.5])
    hi = np.array([0.0, 0.1, 0.5, 1.0])
    share = lo[y] + (hi[y] - lo[y]) * rng.random(n)
    share[y == 0] = 0.0
    share[(y > 0) & (share == lo[y])] = hi[y][(y > 0) & (share == lo[y])]
    assert np.all(class_from_share(share) == y)
    return Dataset(
        X=X,
        missing=missing,
        y=y,
        outage_share=share,
        track_id=np.array([f"row{i}" for i in range(n)], dtype=object),
        timestamp=np.zeros(n, dtype=np.int64),
    )
