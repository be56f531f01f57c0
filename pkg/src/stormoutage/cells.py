"""Storm cell identification: threshold a frame, label 8-connected regions."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import mapping

from .grid import GeoTransform, RadarFrame, pixel_to_world

DBZ_THRESHOLD = 35.0
BUFFER_DEGREES = 0.1
QUAD_SEGS = 16

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(eq=False)
class StormCell:
    cell_id: int
    timestamp: int
    pixels: np.ndarray  # (n, 2) int array of (row, col)
    geo: GeoTransform
    dbz_max: float
    dbz_mean: float
    dbz_std: float
    # optional precomputed geometry, used for cells built directly from polygons
    _polygon: object = field(default=None, repr=False)

    @property
    def n_pixels(self) -> int:
        return len(self.pixels)

    @property
    def area_km2(self) -> float:
        return self.n_pixels * (self.geo.pixel_size / 1000.0) ** 2

    @cached_property
    def centroid(self) -> tuple[float, float]:
        x, y = pixel_to_world(self.geo, (self.pixels[:, 1], self.pixels[:, 0]))
        return float(np.mean(x)), float(np.mean(y))

    @cached_property
    def polygon(self):
        if self._polygon is not None:
            return self._polygon
        return pixels_to_polygon(self.pixels, self.geo)

    def pixel_keys(self) -> frozenset:
        return frozenset(map(tuple, self.pixels.tolist()))


def _row_runs(pixels: np.ndarray):
    """Collapse pixels into horizontal runs ``(row, col_start, col_end_inclusive)``."""
    order = np.lexsort((pixels[:, 1], pixels[:, 0]))
    p = pixels[order]
    rows, cols = p[:, 0], p[:, 1]
    brk = np.ones(len(p), dtype=bool)
    brk[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1] + 1)
    starts = np.flatnonzero(brk)
    ends = np.append(starts[1:], len(p)) - 1
    return np.column_stack([rows[starts], cols[starts], cols[ends]])


def pixels_to_polygon(pixels: np.ndarray, geo: GeoTransform):
    """Exact outer boundary of a pixel region as a shapely (Multi)Polygon."""
    runs = _row_runs(np.asarray(pixels))
    ps = geo.pixel_size
    x0 = geo.origin_easting + runs[:, 1] * ps
    x1 = geo.origin_easting + (runs[:, 2] + 1) * ps
    y1 = geo.origin_northing - runs[:, 0] * ps
    y0 = y1 - ps
    boxes = shapely.box(x0, y0, x1, y1)
    return shapely.union_all(boxes, grid_size=None)


def cell_from_pixels(pixels, values: np.ndarray | None, geo: GeoTransform, cell_id=0, timestamp=0) -> StormCell:
    pixels = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    if values is None:
        v = np.full(len(pixels), DBZ_THRESHOLD)
    else:
        v = values[pixels[:, 0], pixels[:, 1]]
    return StormCell(
        cell_id=cell_id,
        timestamp=int(timestamp),
        pixels=pixels,
        geo=geo,
        dbz_max=float(np.max(v)),
        dbz_mean=float(np.mean(v)),
        dbz_std=float(np.std(v)),
    )


def super_threshold_mask(frame: RadarFrame, threshold_dbz: float = DBZ_THRESHOLD) -> np.ndarray:
    v = frame.values
    with np.errstate(invalid="ignore"):
        return np.nan_to_num(v, nan=-np.inf) >= threshold_dbz


def identify_cells(frame: RadarFrame, threshold_dbz: float = DBZ_THRESHOLD) -> list[StormCell]:
    """One cell per 8-connected component of pixels at or above ``threshold_dbz``.

    Cells are ordered by descending pixel count, ties by the first pixel in
    row-major order, and numbered in that order.
    """
    mask = super_threshold_mask(frame, threshold_dbz)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    flat = labels.ravel()
    idx = np.flatnonzero(flat)
    lab = flat[idx]
    order = np.argsort(lab, kind="stable")
    idx, lab = idx[order], lab[order]
    bounds = np.flatnonzero(np.diff(lab)) + 1
    groups = np.split(idx, bounds)
    # each group is already in row-major order, so group[0] is its first pixel
    groups.sort(key=lambda g: (-len(g), g[0]))
    width = frame.width
    vals = frame.values
    cells = []
    for i, g in enumerate(groups):
        pix = np.column_stack([g // width, g % width])
        cells.append(cell_from_pixels(pix, vals, frame.geo, cell_id=i, timestamp=frame.timestamp))
    return cells


def buffer_meters(geom, distance_m: float):
    if distance_m < 0:
        raise ValueError(f"buffer distance must be non-negative, got {distance_m}")
    if distance_m == 0:
        return geom
    return geom.buffer(distance_m, quad_segs=QUAD_SEGS)


def buffer_geometry(polygon, distance_degrees: float = BUFFER_DEGREES, geo: GeoTransform | None = None):
    """Dilate ``polygon`` by ``distance_degrees`` converted to meters via ``geo``."""
    if distance_degrees < 0:
        raise ValueError(f"buffer distance must be non-negative, got {distance_degrees}")
    geo = geo or GeoTransform()
    if geo.anchor_latlon is None:
        raise ValueError("degree-based buffering needs a lat/lon anchor on the GeoTransform")
    return buffer_meters(polygon, geo.degrees_to_meters(distance_degrees))


# -- export ---------------------------------------------------------------------

def encode_runs(pixels: np.ndarray) -> list[list[int]]:
    return _row_runs(np.asarray(pixels)).tolist()


def decode_runs(runs) -> np.ndarray:
    out = [(r, c) for r, c0, c1 in runs for c in range(c0, c1 + 1)]
    return np.asarray(out, dtype=np.int64).reshape(-1, 2)


def round_geometry(geom, ndigits=3):
    return shapely.set_precision(geom, 10.0 ** -ndigits)


def cell_feature(cell: StormCell) -> dict:
    return {
        "type": "Feature",
        "geometry": mapping(cell.polygon),
        "properties": {
            "cell_id": cell.cell_id,
            "timestamp": cell.timestamp,
            "area_km2": round(cell.area_km2, 6),
            "dbz_max": round(cell.dbz_max, 4),
            "dbz_mean": round(cell.dbz_mean, 4),
            "dbz_std": round(cell.dbz_std, 4),
            "centroid": [round(c, 3) for c in cell.centroid],
            "pixel_runs": encode_runs(cell.pixels),
        },
    }


def cell_from_feature(feat: dict, geo: GeoTransform) -> StormCell:
    p = feat["properties"]
    return StormCell(
        cell_id=int(p["cell_id"]),
        timestamp=int(p["timestamp"]),
        pixels=decode_runs(p["pixel_runs"]),
        geo=geo,
        dbz_max=float(p["dbz_max"]),
        dbz_mean=float(p["dbz_mean"]),
        dbz_std=float(p["dbz_std"]),
    )
