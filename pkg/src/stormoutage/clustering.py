"""GDBSCAN over storm cells with area-weighted core criteria."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from shapely.geometry import mapping
from shapely.strtree import STRtree

from .cells import StormCell

RADIUS_KM = 2.0
MIN_AREA_KM2 = 20.0

CORE, OUTLIER = "core", "outlier"


@dataclass(eq=False)
class StormCluster:
    cluster_id: int
    timestamp: int
    members: list[tuple[StormCell, str]]
    track_id: str | None = None
    parent_track_id: str | None = None
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not any(role == CORE for _, role in self.members):
            raise ValueError(f"cluster {self.cluster_id} has no core member")

    @property
    def cells(self) -> list[StormCell]:
        return [c for c, _ in self.members]

    @property
    def total_area_km2(self) -> float:
        return float(sum(c.area_km2 for c in self.cells))

    @cached_property
    def pixels(self) -> np.ndarray:
        return np.concatenate([c.pixels for c in self.cells])

    @cached_property
    def geometry(self):
        return shapely.union_all([c.polygon for c in self.cells])

    @cached_property
    def centroid(self) -> tuple[float, float]:
        w = np.array([c.n_pixels for c in self.cells], dtype=float)
        xy = np.array([c.centroid for c in self.cells])
        return float(np.dot(w, xy[:, 0]) / w.sum()), float(np.dot(w, xy[:, 1]) / w.sum())

    @property
    def min_cell_id(self) -> int:
        return min(c.cell_id for c in self.cells)


def neighborhood_distance(a: StormCell, b: StormCell) -> float:
    """Minimum boundary-to-boundary distance in km (0 when the polygons touch)."""
    return a.polygon.distance(b.polygon) / 1000.0


def _neighbors_polygon(cells, radius_m):
    polys = [c.polygon for c in cells]
    tree = STRtree(polys)
    src, dst = tree.query(polys, predicate="dwithin", distance=radius_m)
    nbrs = [[] for _ in cells]
    for i, j in zip(src.tolist(), dst.tolist()):
        nbrs[i].append(j)
    return nbrs


def _neighbors_centroid(cells, radius_m):
    xy = np.array([c.centroid for c in cells])
    d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
    return [np.flatnonzero(row <= radius_m).tolist() for row in d]


def _cell_distance_m(a, b, kernel):
    if kernel == "centroid":
        return float(np.hypot(a.centroid[0] - b.centroid[0], a.centroid[1] - b.centroid[1]))
    return a.polygon.distance(b.polygon)


def gdbscan(cells, radius_km: float = RADIUS_KM, min_area_km2: float = MIN_AREA_KM2,
            include_self: bool = True, kernel: str = "polygon"):
    """Cluster one timestamp's cells.

    A cell is core when the summed area of cells within ``radius_km`` of it
    reaches ``min_area_km2``. Cores linked through neighborhoods form one
    cluster; a non-core cell in range of a core joins the cluster of its
    nearest core (ties to the lower cell id); everything else is noise.

    Returns ``(clusters, noise)``; clusters are numbered by their smallest
    member cell id.
    """
    cells = list(cells)
    if not cells:
        return [], []
    if len({c.timestamp for c in cells}) > 1:
        raise ValueError("gdbscan needs cells from a single timestamp")
    radius_m = radius_km * 1000.0
    if kernel == "polygon":
        nbrs = _neighbors_polygon(cells, radius_m)
    elif kernel == "centroid":
        nbrs = _neighbors_centroid(cells, radius_m)
    else:
        raise ValueError(f"unknown distance kernel {kernel!r}")
    if not include_self:
        nbrs = [[j for j in nb if j != i] for i, nb in enumerate(nbrs)]

    area = np.array([c.area_km2 for c in cells])
    core = np.array([area[nb].sum() >= min_area_km2 for nb in nbrs])

    # connected components of the core-core neighbor graph
    label = np.full(len(cells), -1)
    n_clusters = 0
    for i in np.flatnonzero(core):
        if label[i] >= 0:
            continue
        label[i] = n_clusters
        stack = [i]
        while stack:
            k = stack.pop()
            for j in nbrs[k]:
                if core[j] and label[j] < 0:
                    label[j] = n_clusters
                    stack.append(j)
        n_clusters += 1

    for i in np.flatnonzero(~core):
        cands = [j for j in nbrs[i] if core[j]]
        if not cands:
            continue
        best = min(cands, key=lambda j: (_cell_distance_m(cells[i], cells[j], kernel), cells[j].cell_id))
        label[i] = label[best]

    groups: dict[int, list] = {}
    for i, lab in enumerate(label):
        if lab >= 0:
            groups.setdefault(int(lab), []).append((cells[i], CORE if core[i] else OUTLIER))
    ts = cells[0].timestamp
    ordered = sorted(groups.values(), key=lambda ms: min(c.cell_id for c, _ in ms))
    clusters = [
        StormCluster(k, ts, sorted(ms, key=lambda m: m[0].cell_id)) for k, ms in enumerate(ordered)
    ]
    noise = [cells[i] for i in range(len(cells)) if label[i] < 0]
    return clusters, noise


def cluster_feature(cl: StormCluster) -> dict:
    return {
        "type": "Feature",
        "geometry": mapping(cl.geometry),
        "properties": {
            "cluster_id": cl.cluster_id,
            "timestamp": cl.timestamp,
            "track_id": cl.track_id,
            "parent_track_id": cl.parent_track_id,
            "total_area_km2": round(cl.total_area_km2, 6),
            "centroid": [round(v, 3) for v in cl.centroid],
            "members": [{"cell_id": c.cell_id, "role": r} for c, r in cl.members],
        },
    }


def cluster_from_feature(feat: dict, cells_by_id: dict) -> StormCluster:
    p = feat["properties"]
    members = [(cells_by_id[m["cell_id"]], m["role"]) for m in p["members"]]
    return StormCluster(
        int(p["cluster_id"]), int(p["timestamp"]), members, p.get("track_id"), p.get("parent_track_id")
    )
