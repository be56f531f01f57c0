"""Cluster linking across frames and constant-velocity Kalman nowcasting."""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace

import numpy as np
import shapely
from shapely import affinity

from .cells import identify_cells
from .clustering import StormCluster, gdbscan
from .flow import MotionField, estimate_flow
from .grid import FRAME_INTERVAL_S, RadarFrame

NOWCAST_STEPS = 24
TRACK_NAMESPACE = uuid.UUID("6c1f3a52-3f0e-4c1b-9a55-2f4f3d1b7e10")


@dataclass(frozen=True)
class KalmanConfig:
    q: float = 1e-6  # white-noise acceleration variance, m^2/s^4
    r: float = 250.0 ** 2  # centroid measurement variance, m^2
    init_vel_var: float = 1e8  # (m/s)^2, effectively diffuse when no flow velocity is available
    flow_vel_var: float = 3.0 ** 2


@dataclass
class TrackState:
    x: np.ndarray  # [x, y, vx, vy]
    P: np.ndarray  # 4x4
    t: int

    def copy(self) -> "TrackState":
        return TrackState(self.x.copy(), self.P.copy(), self.t)


@dataclass
class Observation:
    timestamp: int
    centroid: tuple[float, float]
    cluster_id: int | None = None


@dataclass
class Track:
    track_id: str
    observations: list[Observation]
    state: TrackState
    parent_id: str | None = None
    nowcast_points: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def first_timestamp(self) -> int:
        return self.observations[0].timestamp

    @property
    def last_timestamp(self) -> int:
        return self.observations[-1].timestamp

    @property
    def age_minutes(self) -> float:
        return (self.last_timestamp - self.first_timestamp) / 60.0

    def age_at(self, t: int) -> float:
        return max(0.0, (t - self.first_timestamp) / 60.0)


def transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def process_noise(dt: float, q: float) -> np.ndarray:
    a, b, c = dt ** 4 / 4.0, dt ** 3 / 2.0, dt ** 2
    return q * np.array([[a, 0, b, 0], [0, a, 0, b], [b, 0, c, 0], [0, b, 0, c]])


_H = np.hstack([np.eye(2), np.zeros((2, 2))])


def kalman_predict(state: TrackState, t: int, q: float) -> TrackState:
    dt = t - state.t
    F = transition(dt)
    P = F @ state.P @ F.T + process_noise(dt, q)
    return TrackState(F @ state.x, 0.5 * (P + P.T), t)


def kalman_update(state: TrackState, z, r: float) -> TrackState:
    """Measurement update in Joseph form; keeps P symmetric PSD."""
    z = np.asarray(z, dtype=float)
    R = r * np.eye(2)
    S = _H @ state.P @ _H.T + R
    K = np.linalg.solve(S, _H @ state.P).T
    x = state.x + K @ (z - _H @ state.x)
    IKH = np.eye(4) - K @ _H
    P = IKH @ state.P @ IKH.T + K @ R @ K.T
    return TrackState(x, 0.5 * (P + P.T), state.t)


def init_state(centroid, t: int, cfg: KalmanConfig, velocity=None) -> TrackState:
    vvar = cfg.init_vel_var if velocity is None else cfg.flow_vel_var
    v = (0.0, 0.0) if velocity is None else velocity
    P = np.diag([cfg.r, cfg.r, vvar, vvar]).astype(float)
    return TrackState(np.array([centroid[0], centroid[1], v[0], v[1]], dtype=float), P, int(t))


def start_track(track_id: str, centroid, t: int, cfg: KalmanConfig = KalmanConfig(), velocity=None,
                cluster_id=None, parent_id=None) -> Track:
    tr = Track(track_id, [Observation(int(t), tuple(centroid), cluster_id)], init_state(centroid, t, cfg, velocity), parent_id)
    tr.nowcast_points = nowcast(tr)
    return tr


def kalman_step(track: Track, centroid, timestamp: int, cfg: KalmanConfig = KalmanConfig(), cluster_id=None) -> Track:
    """Predict to ``timestamp`` and update with the observed centroid."""
    if timestamp <= track.state.t:
        raise ValueError(f"observation at {timestamp} is not after last update {track.state.t}")
    st = kalman_update(kalman_predict(track.state, int(timestamp), cfg.q), centroid, cfg.r)
    obs = track.observations + [Observation(int(timestamp), tuple(centroid), cluster_id)]
    out = replace(track, observations=obs, state=st)
    out.nowcast_points = nowcast(out)
    return out


def nowcast(track: Track, steps: int = NOWCAST_STEPS, dt: int = FRAME_INTERVAL_S) -> list[tuple[int, float, float]]:
    """Constant-velocity rollout: ``(timestamp, x, y)`` at +dt ... +steps*dt."""
    x = track.state.x
    t0 = track.state.t
    return [(t0 + k * dt, float(x[0] + k * dt * x[2]), float(x[1] + k * dt * x[3])) for k in range(1, steps + 1)]


def fresh_track_id(timestamp: int, cluster_id: int) -> str:
    return str(uuid.uuid5(TRACK_NAMESPACE, f"{int(timestamp)}:{int(cluster_id)}"))


@dataclass
class LinkResult:
    track_id: str
    parent_id: str | None
    inherited: bool
    overlap_km2: float = 0.0


def advect(cluster: StormCluster, flow: MotionField, pixel_size: float, min_confidence: float = 0.5):
    """Cluster geometry shifted by its mean flow; returns ``(geometry, (dx_m, dy_m))``."""
    u, v = flow.mean_over(cluster.pixels, min_confidence)
    dx, dy = u * pixel_size, -v * pixel_size
    return affinity.translate(cluster.geometry, dx, dy), (dx, dy)


def link_clusters(prev_clusters, flow: MotionField | None, cur_clusters, overlap_frac: float = 0.2,
                  pixel_size: float = 250.0, track_birth: dict | None = None, min_confidence: float = 0.5):
    """Assign track ids to ``cur_clusters`` from advected ``prev_clusters``.

    A current cluster takes the id of the advected previous cluster it overlaps
    most, if the overlap reaches ``overlap_frac`` of the smaller area (ties go
    to the older track). When several current clusters pick the same parent
    the largest overlap keeps the id and the rest start fresh tracks that
    record it as parent.
    """
    track_birth = track_birth or {}
    adv = []
    for p in prev_clusters:
        g = advect(p, flow, pixel_size, min_confidence)[0] if flow is not None else p.geometry
        adv.append(g)
    results: list[LinkResult] = []
    for c in cur_clusters:
        cg = c.geometry
        best = None
        for p, g in zip(prev_clusters, adv):
            inter = shapely.intersection(g, cg).area
            if inter <= 0 or inter < overlap_frac * min(g.area, cg.area):
                continue
            key = (-inter, track_birth.get(p.track_id, 0), p.track_id or "")
            if best is None or key < best[0]:
                best = (key, p, inter)
        if best is None:
            results.append(LinkResult(fresh_track_id(c.timestamp, c.cluster_id), None, False))
        else:
            results.append(LinkResult(best[1].track_id, None, True, best[2] / 1e6))
    # resolve splits
    claims: dict[str, list[int]] = {}
    for i, r in enumerate(results):
        if r.inherited:
            claims.setdefault(r.track_id, []).append(i)
    for tid, idx in claims.items():
        if len(idx) < 2:
            continue
        keep = max(idx, key=lambda i: (results[i].overlap_km2, -cur_clusters[i].cluster_id))
        for i in idx:
            if i != keep:
                c = cur_clusters[i]
                results[i] = LinkResult(fresh_track_id(c.timestamp, c.cluster_id), tid, False)
    return results


@dataclass
class TrackerConfig:
    threshold_dbz: float = 35.0
    radius_km: float = 2.0
    min_area_km2: float = 20.0
    overlap_frac: float = 0.2
    flow_levels: int = 3
    flow_window: int = 9
    kalman: KalmanConfig = field(default_factory=KalmanConfig)


@dataclass
class FrameResult:
    frame: RadarFrame
    cells: list
    clusters: list
    noise: list
    flow: MotionField | None
    track_records: list  # (cluster, Track snapshot)


class Tracker:
    """Stateful frame-by-frame detector and tracker. Frames must arrive in time order."""

    def __init__(self, cfg: TrackerConfig = TrackerConfig()):
        self.cfg = cfg
        self.tracks: dict[str, Track] = {}
        self.active: dict[str, Track] = {}
        self._prev: RadarFrame | None = None
        self._prev_clusters: list[StormCluster] = []

    def detect(self, frame: RadarFrame):
        cells = identify_cells(frame, self.cfg.threshold_dbz)
        clusters, noise = gdbscan(cells, self.cfg.radius_km, self.cfg.min_area_km2)
        return cells, clusters, noise

    def step(self, frame: RadarFrame, detected=None) -> FrameResult:
        if self._prev is not None and frame.timestamp <= self._prev.timestamp:
            raise ValueError("frames must be consumed in increasing time order")
        cells, clusters, noise = detected if detected is not None else self.detect(frame)
        flow = None
        consecutive = self._prev is not None and frame.timestamp - self._prev.timestamp == FRAME_INTERVAL_S
        if consecutive:
            flow = estimate_flow(self._prev, frame, self.cfg.flow_levels, self.cfg.flow_window)
            prev_clusters = self._prev_clusters
        else:
            prev_clusters = []
        births = {tid: t.first_timestamp for tid, t in self.active.items()}
        links = link_clusters(prev_clusters, flow, clusters, self.cfg.overlap_frac, frame.geo.pixel_size, births)
        kcfg = self.cfg.kalman
        new_active = {}
        records = []
        for cl, ln in zip(clusters, links):
            cl.track_id, cl.parent_track_id = ln.track_id, ln.parent_id
            if ln.inherited and ln.track_id in self.active:
                tr = kalman_step(self.active[ln.track_id], cl.centroid, frame.timestamp, kcfg, cl.cluster_id)
            else:
                vel = None
                if flow is not None:
                    u, v = flow.mean_over(cl.pixels)
                    if u or v:
                        ps = frame.geo.pixel_size
                        vel = (u * ps / FRAME_INTERVAL_S, -v * ps / FRAME_INTERVAL_S)
                tr = start_track(ln.track_id, cl.centroid, frame.timestamp, kcfg, vel, cl.cluster_id, ln.parent_id)
            new_active[tr.track_id] = tr
            self.tracks[tr.track_id] = tr
            records.append((cl, tr))
        self.active = new_active
        self._prev = frame
        self._prev_clusters = clusters
        return FrameResult(frame, cells, clusters, noise, flow, records)

    def run(self, frames):
        return [self.step(fr) for fr in frames]


def track_record(cluster: StormCluster, tr: Track) -> dict:
    st = tr.state
    return {
        "track_id": tr.track_id,
        "timestamp": st.t,
        "cluster_id": cluster.cluster_id,
        "parent_track_id": tr.parent_id,
        "first_timestamp": tr.first_timestamp,
        "age_minutes": tr.age_minutes,
        "centroid": [round(v, 3) for v in cluster.centroid],
        "state": [round(float(v), 6) for v in st.x],
        "covariance": [[round(float(v), 6) for v in row] for row in st.P],
        "nowcast": [[t, round(x, 3), round(y, 3)] for t, x, y in tr.nowcast_points],
    }
