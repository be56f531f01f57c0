"""Dense pyramidal Lucas-Kanade optical flow on reflectivity fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import RadarFrame


@dataclass
class MotionField:
    """Displacements in pixels per frame interval, sampled every ``stride`` pixels.

    ``u`` is along columns (east), ``v`` along rows (south). Grid node
    ``(i, j)`` sits on full-resolution pixel ``(i*stride, j*stride)``.
    """

    u: np.ndarray
    v: np.ndarray
    confidence: np.ndarray
    stride: int = 1

    def sample(self, rows, cols):
        r = np.clip(np.asarray(rows) // self.stride, 0, self.u.shape[0] - 1)
        c = np.clip(np.asarray(cols) // self.stride, 0, self.u.shape[1] - 1)
        return self.u[r, c], self.v[r, c], self.confidence[r, c]

    def mean_over(self, pixels, min_confidence: float = 0.5):
        """Confidence-weighted mean displacement over ``(row, col)`` pixels; zero if none qualify."""
        u, v, w = self.sample(pixels[:, 0], pixels[:, 1])
        ok = w >= min_confidence
        if not ok.any():
            return 0.0, 0.0
        w = w[ok]
        return float(np.dot(u[ok], w) / w.sum()), float(np.dot(v[ok], w) / w.sum())


def _prepare(values: np.ndarray) -> np.ndarray:
    img = np.array(values, dtype=np.float64)
    nan = np.isnan(img)
    if nan.any():
        img[nan] = np.nanmin(img) if (~nan).any() else 0.0
    return img


def _pyramid(img: np.ndarray, levels: int):
    pyr = [img]
    for _ in range(levels - 1):
        prev = pyr[-1]
        if min(prev.shape) < 8:
            break
        pyr.append(ndimage.gaussian_filter(prev, 1.0, mode="nearest")[::2, ::2])
    return pyr


def _gradients(img):
    # central differences, one-sided at the border
    return np.gradient(img, axis=1), np.gradient(img, axis=0)


def estimate_flow(prev: RadarFrame, cur: RadarFrame, levels: int = 3, window: int = 9,
                  iterations: int = 5, stride: int = 4, eig_scale: float = 1.0,
                  min_eig: float = 1e-6) -> MotionField:
    """Coarse-to-fine LK flow from ``prev`` to ``cur``.

    Confidence is ``lmin / (lmin + eig_scale)`` with ``lmin`` the smaller
    eigenvalue of the windowed structure tensor, and exactly 0 where
    ``lmin < min_eig``.
    """
    if not prev.same_geometry(cur):
        raise ValueError("frames differ in geometry")
    if cur.timestamp <= prev.timestamp:
        raise ValueError("cur frame must be later than prev")
    return flow_between(_prepare(prev.values), _prepare(cur.values), levels, window, iterations, stride, eig_scale, min_eig)


def _bspline_weights(f):
    """Cubic B-spline tap weights for fractional offsets ``f`` (taps at -1, 0, 1, 2)."""
    f2, f3 = f * f, f * f * f
    return np.stack([(1 - f) ** 3, 3 * f3 - 6 * f2 + 4, -3 * f3 + 3 * f2 + 3 * f + 1, f3], axis=-1) / 6.0


def _warp_windows(coeffs, ry, rx, u, v, h, pad=0):
    """Sample the spline ``coeffs`` on each point's (2h+1)^2 window shifted by that point's (u, v).

    ``coeffs`` belongs to the image padded by ``pad`` pixels on every side.
    The shift is constant over a window, so one set of separable tap weights
    serves the whole window. Returns an array of shape (len(ry), len(rx), (2h+1)^2).
    """
    n = 2 * h + 1
    H, W = coeffs.shape
    fy, fx = np.floor(v), np.floor(u)
    wy, wx = _bspline_weights(v - fy), _bspline_weights(u - fx)
    span = np.arange(-1, n + 2) - h  # n + 3 taps along each axis
    iy = np.clip(ry[:, None, None] + fy.astype(np.int64)[..., None] + span + pad, 0, H - 1)
    ix = np.clip(rx[None, :, None] + fx.astype(np.int64)[..., None] + span + pad, 0, W - 1)
    patch = coeffs[iy[..., :, None], ix[..., None, :]]  # (m, k, n+3, n+3)
    rows = sum(wy[..., t, None, None] * patch[..., t:t + n, :] for t in range(4))
    out = sum(wx[..., t, None, None] * rows[..., :, t:t + n] for t in range(4))
    return out.reshape(out.shape[0], out.shape[1], n * n)


def _point_grid(shape, spacing):
    return np.arange(0, shape[0], spacing), np.arange(0, shape[1], spacing)


def flow_between(a: np.ndarray, b: np.ndarray, levels=3, window=9, iterations=5, stride=1,
                 eig_scale=1.0, min_eig=1e-6, order=3, max_step=1.0) -> MotionField:
    """Pyramidal LK evaluated on a point grid of spacing ``stride`` at every level.

    Each point's whole window is warped by that point's own displacement, so
    the per-point iteration is the classic LK Gauss-Newton step, damped to
    ``max_step`` pixels. Points displaced outside the frame get zero confidence.
    """
    pa, pb = _pyramid(a, levels), _pyramid(b, levels)
    s = max(1, int(stride))
    h = window // 2
    oy, ox = np.mgrid[-h:h + 1, -h:h + 1]
    oy, ox = oy.ravel(), ox.ravel()
    u = v = None
    prev_axes = None
    for lvl in range(len(pa) - 1, -1, -1):
        A, B = pa[lvl], pb[lvl]
        ry, rx = _point_grid(A.shape, s)
        if u is None:
            u = np.zeros((len(ry), len(rx)))
            v = np.zeros_like(u)
        else:
            # coarse point (i, j) sits at pixel (i*s, j*s) of the half-resolution level
            cy = (ry / 2.0) / s
            cx = (rx / 2.0) / s
            gy, gx = np.meshgrid(cy, cx, indexing="ij")
            u = 2.0 * ndimage.map_coordinates(u, [gy, gx], order=1, mode="nearest")
            v = 2.0 * ndimage.map_coordinates(v, [gy, gx], order=1, mode="nearest")
        Ix, Iy = _gradients(A)
        Sxx = ndimage.uniform_filter(Ix * Ix, window, mode="nearest")[np.ix_(ry, rx)]
        Sxy = ndimage.uniform_filter(Ix * Iy, window, mode="nearest")[np.ix_(ry, rx)]
        Syy = ndimage.uniform_filter(Iy * Iy, window, mode="nearest")[np.ix_(ry, rx)]
        det = Sxx * Syy - Sxy * Sxy
        tr = Sxx + Syy
        lmin = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4 * det, 0.0)))
        ok = lmin >= min_eig
        safe_det = np.where(ok, det, 1.0)
        # window samples around every point, clamped at the border
        qy = np.clip(ry[:, None, None] + oy[None, None, :], 0, A.shape[0] - 1)
        qx = np.clip(rx[None, :, None] + ox[None, None, :], 0, A.shape[1] - 1)
        qy, qx = np.broadcast_arrays(qy, qx)
        wx, wy, wa = Ix[qy, qx], Iy[qy, qx], A[qy, qx]
        # edge padding makes the spline agree with the clamped window samples of A near the border
        pad = h + 8
        if order == 3:
            coeffs = ndimage.spline_filter(np.pad(B, pad, mode="edge"), order=3, mode="nearest")
        else:
            coeffs = ndimage.spline_filter(B, order=order, mode="nearest") if order > 1 else B
        for _ in range(iterations):
            if order == 3:
                warped = _warp_windows(coeffs, ry, rx, u, v, h, pad)
            else:
                warped = ndimage.map_coordinates(coeffs, [qy + v[..., None], qx + u[..., None]], order=order,
                                                 mode="nearest", prefilter=False)
            It = warped - wa
            Sxt = np.einsum("ijk,ijk->ij", wx, It)
            Syt = np.einsum("ijk,ijk->ij", wy, It)
            # uniform_filter averages, the window sums here are totals
            n = float(window * window)
            du = (-Syy * Sxt + Sxy * Syt) / (safe_det * n)
            dv = (Sxy * Sxt - Sxx * Syt) / (safe_det * n)
            u = u + np.where(ok, np.clip(du, -max_step, max_step), 0.0)
            v = v + np.where(ok, np.clip(dv, -max_step, max_step), 0.0)
    ty = ry[:, None] + v
    tx = rx[None, :] + u
    ok &= (ty >= 0) & (ty <= A.shape[0] - 1) & (tx >= 0) & (tx <= A.shape[1] - 1)
    conf = np.where(ok, lmin / (lmin + eig_scale), 0.0)
    u = np.where(ok, u, 0.0)
    v = np.where(ok, v, 0.0)
    return MotionField(u, v, conf, s)
