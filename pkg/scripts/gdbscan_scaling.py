"""Wall time of cell clustering as the number of cells per frame grows."""

import argparse
import time

import numpy as np
from scipy.ndimage import gaussian_filter

from stormoutage.cells import identify_cells
from stormoutage.clustering import gdbscan
from stormoutage.grid import GeoTransform, RadarFrame


def frame_with_cells(size: int, sigma: float, seed: int) -> RadarFrame:
    rng = np.random.default_rng(seed)
    f = gaussian_filter(rng.standard_normal((size, size)), sigma)
    f = 30 + 8 * (f - f.mean()) / f.std()
    return RadarFrame(0, np.round(f, 2), GeoTransform(0.0, 0.0, 250.0))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    ap.add_argument("--sigma", type=float, default=1.5)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    print(f"{'frame':>7} {'cells':>7} {'clusters':>9} {'seconds':>9} {'us/cell':>9}")
    for size in args.sizes:
        cells = identify_cells(frame_with_cells(size, args.sigma, size))
        best = np.inf
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            clusters, _ = gdbscan(cells)
            best = min(best, time.perf_counter() - t0)
        print(f"{size:>7} {len(cells):>7} {len(clusters):>9} {best:>9.3f} {1e6 * best / max(len(cells), 1):>9.1f}")


if __name__ == "__main__":
    main()
