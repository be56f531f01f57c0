"""Independent reference implementations and data builders used by the tests."""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.ndimage import gaussian_filter, shift as nd_shift

from stormoutage.cells import cell_from_pixels
from stormoutage.grid import GeoTransform, RadarFrame

GEO = GeoTransform(0.0, 0.0, 250.0)


def flood_fill_components(mask: np.ndarray) -> set[frozenset]:
    """8-connected components of ``mask`` by explicit BFS, as sets of (row, col)."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = set()
    for r0 in range(h):
        for c0 in range(w):
            if not mask[r0, c0] or seen[r0, c0]:
                continue
            comp = []
            q = deque([(r0, c0)])
            seen[r0, c0] = True
            while q:
                r, c = q.popleft()
                comp.append((r, c))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and not seen[rr, cc]:
                            seen[rr, cc] = True
                            q.append((rr, cc))
            comps.add(frozenset(comp))
    return comps


def random_dbz_frame(rng, shape=(64, 64), timestamp=0) -> RadarFrame:
    """Smoothed noise rescaled so roughly a quarter of pixels exceed 35 dBZ."""
    f = gaussian_filter(rng.standard_normal(shape), rng.uniform(0.8, 2.5))
    f = (f - f.mean()) / (f.std() + 1e-12)
    vals = np.round(np.clip(30 + 8 * f, -32, 95), 2)
    return RadarFrame(timestamp, vals, GEO)


def random_rect_cells(rng, n_cells, grid=120, side=(2, 22), timestamp=0):
    """Up to ``n_cells`` non-overlapping rectangular cells with ids 0..n-1."""
    occ = np.zeros((grid, grid), dtype=bool)
    cells = []
    tries = 0
    while len(cells) < n_cells and tries < 500:
        tries += 1
        h, w = rng.integers(side[0], side[1] + 1, 2)
        r, c = rng.integers(0, grid - h), rng.integers(0, grid - w)
        # keep one empty pixel around each cell, as separate components would have
        if occ[max(r - 1, 0):r + h + 1, max(c - 1, 0):c + w + 1].any():
            continue
        occ[r:r + h, c:c + w] = True
        rr, cc = np.mgrid[r:r + h, c:c + w]
        px = np.column_stack([rr.ravel(), cc.ravel()])
        cells.append(cell_from_pixels(px, None, GEO, cell_id=len(cells), timestamp=timestamp))
    return cells


def brute_force_gdbscan(cells, radius_km=2.0, min_area_km2=20.0):
    """Clusters from the definition: returns ``{frozenset((cell_id, role), ...)}`` and noise ids."""
    n = len(cells)
    if n == 0:
        return set(), set()
    r = radius_km * 1000.0
    d = np.array([[cells[i].polygon.distance(cells[j].polygon) for j in range(n)] for i in range(n)])
    near = d <= r
    area = np.array([c.area_km2 for c in cells])
    core = np.array([area[near[i]].sum() >= min_area_km2 for i in range(n)])
    # density-connectivity among cores: transitive closure of the core-core graph
    reach = near & core[:, None] & core[None, :]
    for k in range(n):
        reach = reach | (reach[:, k:k + 1] & reach[k:k + 1, :])
    comps = {}
    for i in np.flatnonzero(core):
        key = frozenset(np.flatnonzero(reach[i] | (np.arange(n) == i)).tolist())
        comps[key] = set(key)
    members = {k: [(cells[i].cell_id, "core") for i in k] for k in comps}
    noise = set()
    for i in np.flatnonzero(~core):
        cands = [j for j in range(n) if core[j] and near[i, j]]
        if not cands:
            noise.add(cells[i].cell_id)
            continue
        best = min(cands, key=lambda j: (d[i, j], cells[j].cell_id))
        for k in comps:
            if best in k:
                members[k].append((cells[i].cell_id, "outlier"))
    return {frozenset(m) for m in members.values()}, noise


def textured_pair(rng, shift_px, shape=(96, 96)):
    """Smooth random texture and a copy translated by ``shift_px = (dx, dy)`` (columns, rows)."""
    base = gaussian_filter(rng.standard_normal((shape[0] + 40, shape[1] + 40)), 2.0)
    base = 20 + 15 * base / base.std()
    moved = nd_shift(base, (shift_px[1], shift_px[0]), order=3, mode="nearest")
    a = base[20:-20, 20:-20]
    b = moved[20:-20, 20:-20]
    return RadarFrame(0, a, GEO), RadarFrame(300, b, GEO)


def blobs(n=4000, n_features=16, informative=3, separation=6.0, seed=0):
    """Four Gaussian classes whose means sit on a regular tetrahedron (pairwise gap ``separation``)
    in the first ``informative`` features; remaining features are unit noise."""
    rng = np.random.default_rng(seed)
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    tet *= separation / (2 * np.sqrt(2))
    y = np.arange(n) % 4
    rng.shuffle(y)
    X = rng.standard_normal((n, n_features))
    X[:, :informative] += tet[y][:, :informative]
    return X, y
