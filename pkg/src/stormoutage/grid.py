"""Raster model for reflectivity frames.

Geometry lives in a planar projected frame measured in meters, north-up. Pixel
indices are ``(col, row)`` pairs and map to pixel *centers*.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

log = logging.getLogger(__name__)

FRAME_INTERVAL_S = 300
DBZ_MIN, DBZ_MAX = -32.0, 95.0
NODATA_VALUE = -9999.0
METERS_PER_DEG_LAT = 111_320.0

_TS_RE = re.compile(r"(\d{8}T\d{6}Z)")


class BoundsError(IndexError):
    pass


class FrameFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GeoTransform:
    """North-up affine grid. ``origin_*`` is the outer top-left corner."""

    origin_easting: float = 0.0
    origin_northing: float = 0.0
    pixel_size: float = 250.0
    # (lat, lon) of the world origin; only used where distances come in degrees
    anchor_latlon: tuple[float, float] | None = (62.0, 26.0)

    def __post_init__(self):
        if not self.pixel_size > 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")

    def world_to_latlon(self, easting, northing):
        if self.anchor_latlon is None:
            raise ValueError("GeoTransform has no lat/lon anchor")
        lat0, lon0 = self.anchor_latlon
        lat = lat0 + np.asarray(northing) / METERS_PER_DEG_LAT
        lon = lon0 + np.asarray(easting) / (METERS_PER_DEG_LAT * math.cos(math.radians(lat0)))
        return lat, lon

    def degrees_to_meters(self, degrees: float) -> float:
        # one degree of latitude; longitude degrees are not used for buffering
        return float(degrees) * METERS_PER_DEG_LAT

    def to_dict(self) -> dict:
        return {
            "origin_easting": self.origin_easting,
            "origin_northing": self.origin_northing,
            "pixel_size": self.pixel_size,
            "anchor_latlon": list(self.anchor_latlon) if self.anchor_latlon else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeoTransform":
        anchor = d.get("anchor_latlon")
        return cls(
            origin_easting=float(d.get("origin_easting", 0.0)),
            origin_northing=float(d.get("origin_northing", 0.0)),
            pixel_size=float(d.get("pixel_size", 250.0)),
            anchor_latlon=tuple(anchor) if anchor else None,
        )


def _check_bounds(col, row, shape):
    if shape is None:
        if np.any(np.asarray(col) < 0) or np.any(np.asarray(row) < 0):
            raise BoundsError(f"negative pixel index ({col}, {row})")
        return
    height, width = shape
    c, r = np.asarray(col), np.asarray(row)
    if np.any((c < 0) | (c >= width) | (r < 0) | (r >= height)):
        raise BoundsError(f"pixel ({col}, {row}) outside {width}x{height} frame")


def pixel_to_world(geo: GeoTransform, px, shape=None):
    """Center of pixel ``px = (col, row)`` in world meters.

    ``shape`` is ``(height, width)``; when given the index is bounds-checked.
    Works elementwise on arrays.
    """
    col, row = px
    _check_bounds(col, row, shape)
    x = geo.origin_easting + (np.asarray(col, dtype=float) + 0.5) * geo.pixel_size
    y = geo.origin_northing - (np.asarray(row, dtype=float) + 0.5) * geo.pixel_size
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def world_to_pixel(geo: GeoTransform, xy, shape=None):
    """Inverse of :func:`pixel_to_world`; returns integer ``(col, row)``."""
    x, y = xy
    col = np.floor((np.asarray(x, dtype=float) - geo.origin_easting) / geo.pixel_size)
    row = np.floor((geo.origin_northing - np.asarray(y, dtype=float)) / geo.pixel_size)
    col, row = col.astype(np.int64), row.astype(np.int64)
    _check_bounds(col, row, shape)
    if np.ndim(col) == 0:
        return int(col), int(row)
    return col, row


@dataclass(frozen=True, eq=False)
class RadarFrame:
    """Reflectivity raster (dBZ) at one timestamp. NaN marks no-data."""

    timestamp: int
    values: np.ndarray
    geo: GeoTransform = field(default_factory=GeoTransform)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError(f"frame values must be a non-empty 2-D array, got shape {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "timestamp", int(self.timestamp))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def same_geometry(self, other: "RadarFrame") -> bool:
        return self.shape == other.shape and self.geo == other.geo


def check_sequence(frames) -> None:
    """Frames must share one geometry and be strictly time-ordered at the 5-minute cadence."""
    for a, b in zip(frames, frames[1:]):
        if not b.same_geometry(a):
            raise FrameFormatError(f"{frame_filename(b.timestamp)}: geometry differs from {frame_filename(a.timestamp)}")
        if b.timestamp - a.timestamp != FRAME_INTERVAL_S:
            raise FrameFormatError(
                f"{frame_filename(b.timestamp)}: expected {FRAME_INTERVAL_S} s after "
                f"{frame_filename(a.timestamp)}, got {b.timestamp - a.timestamp} s"
            )


# -- timestamps ---------------------------------------------------------------

def iso_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def parse_iso_timestamp(s: str) -> int:
    dt = datetime.strptime(s, "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


# -- ESRI ASCII grid ------------------------------------------------------------

def write_ascii_grid(frame: RadarFrame, path) -> None:
    geo = frame.geo
    yll = geo.origin_northing - frame.height * geo.pixel_size
    vals = np.where(np.isnan(frame.values), NODATA_VALUE, frame.values)
    with open(path, "w") as f:
        f.write(f"ncols {frame.width}\n")
        f.write(f"nrows {frame.height}\n")
        f.write(f"xllcorner {geo.origin_easting!r}\n")
        f.write(f"yllcorner {yll!r}\n")
        f.write(f"cellsize {geo.pixel_size!r}\n")
        f.write(f"nodata_value {NODATA_VALUE:g}\n")
        for row in vals:
            f.write(" ".join(f"{v:.2f}" for v in row))
            f.write("\n")


def read_ascii_grid(path, anchor_latlon=(62.0, 26.0)) -> RadarFrame:
    name = os.path.basename(path)
    m = _TS_RE.search(name)
    if not m:
        raise FrameFormatError(f"{name}: filename carries no ISO-8601 timestamp")
    ts = parse_iso_timestamp(m.group(1))
    header = {}
    with open(path) as f:
        for _ in range(6):
            line = f.readline()
            if not line:
                raise FrameFormatError(f"{name}: truncated header")
            try:
                key, val = line.split()
                header[key.lower()] = float(val)
            except ValueError:
                raise FrameFormatError(f"{name}: malformed header line {line.strip()!r}") from None
        try:
            data = np.loadtxt(f, dtype=np.float64, ndmin=2)
        except ValueError as e:
            raise FrameFormatError(f"{name}: {e}") from e
    missing = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize"} - set(header)
    if missing:
        raise FrameFormatError(f"{name}: header lacks {sorted(missing)}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    if data.shape != (nrows, ncols):
        raise FrameFormatError(f"{name}: expected {nrows}x{ncols} values, got {data.shape}")
    nodata = header.get("nodata_value", NODATA_VALUE)
    data[data == nodata] = np.nan
    cs = header["cellsize"]
    geo = GeoTransform(
        origin_easting=header["xllcorner"],
        origin_northing=header["yllcorner"] + nrows * cs,
        pixel_size=cs,
        anchor_latlon=tuple(anchor_latlon) if anchor_latlon else None,
    )
    return RadarFrame(ts, data, geo)


def frame_filename(ts: int) -> str:
    return f"{iso_timestamp(ts)}.asc"


def write_frames(frames, directory) -> list[str]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for fr in frames:
        p = os.path.join(directory, frame_filename(fr.timestamp))
        write_ascii_grid(fr, p)
        paths.append(p)
    if frames:
        with open(os.path.join(directory, "frames.json"), "w") as f:
            json.dump({"geo": frames[0].geo.to_dict(), "n_frames": len(frames)}, f, indent=1, sort_keys=True)
    return paths


def read_frames(directory) -> list[RadarFrame]:
    """Load every ``*.asc`` frame in ``directory``, sorted by timestamp."""
    if not os.path.isdir(directory):
        raise FrameFormatError(f"frame directory {directory} does not exist")
    anchor = (62.0, 26.0)
    meta = os.path.join(directory, "frames.json")
    if os.path.exists(meta):
        with open(meta) as f:
            a = json.load(f)["geo"].get("anchor_latlon")
        anchor = tuple(a) if a else None
    names = sorted(n for n in os.listdir(directory) if n.endswith(".asc"))
    frames = [read_ascii_grid(os.path.join(directory, n), anchor) for n in names]
    frames.sort(key=lambda fr: fr.timestamp)
    for a, b in zip(frames, frames[1:]):
        if not b.same_geometry(a):
            raise FrameFormatError(f"frame {iso_timestamp(b.timestamp)} geometry differs from previous frame")
    return frames
