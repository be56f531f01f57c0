"""SMOTE oversampling for multiclass data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SamplingError(ValueError):
    pass


@dataclass
class SmoteConfig:
    k: int = 5
    seed: int = 0
    target: int | dict | None = None  # per-class count; default is the majority count

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class SmoteResult:
    X: np.ndarray
    y: np.ndarray
    # one entry per synthetic row (rows n_original.. of X): indices into the input and lambda
    parent: np.ndarray
    neighbor: np.ndarray
    lam: np.ndarray
    n_original: int


def nearest_neighbors(Xc: np.ndarray, k: int, chunk: int = 1024) -> np.ndarray:
    """``k`` nearest rows (Euclidean) for each row, excluding itself; ties by row index."""
    n = len(Xc)
    k = min(k, n - 1)
    sq = np.einsum("ij,ij->i", Xc, Xc)
    out = np.empty((n, k), dtype=np.int64)
    for a in range(0, n, chunk):
        b = min(n, a + chunk)
        d = sq[a:b, None] + sq[None, :] - 2.0 * Xc[a:b] @ Xc.T
        np.maximum(d, 0.0, out=d)
        d[np.arange(b - a), np.arange(a, b)] = np.inf
        out[a:b] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def smote_oversample(X, y, cfg: SmoteConfig = SmoteConfig(), lam=None) -> SmoteResult:
    """Append synthetic rows ``x_i + lam * (x_nb - x_i)`` until every class reaches its target.

    Original rows are kept unchanged at the top of the output. ``lam`` forces
    a fixed interpolation factor (used in tests).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with len(y) == n")
    classes, counts = np.unique(y, return_counts=True)
    if isinstance(cfg.target, dict):
        targets = {int(c): int(cfg.target.get(int(c), n)) for c, n in zip(classes, counts)}
    else:
        t = int(counts.max()) if cfg.target is None else int(cfg.target)
        targets = {int(c): t for c in classes}
    rng = np.random.default_rng(cfg.seed)
    new_X, new_y, par, nbr, lams = [], [], [], [], []
    for c, n in zip(classes.tolist(), counts.tolist()):
        need = targets[c] - n
        if need < 0:
            raise ValueError(f"target {targets[c]} for class {c} below its {n} existing samples")
        if need == 0:
            continue
        if n < 2:
            raise SamplingError(f"class {c} has {n} sample(s); SMOTE needs at least 2")
        idx = np.flatnonzero(y == c)
        nn = nearest_neighbors(X[idx], cfg.k)
        i = rng.integers(0, n, need)
        j = nn[i, rng.integers(0, nn.shape[1], need)]
        l = rng.random(need) if lam is None else np.full(need, float(lam))
        xi, xj = X[idx[i]], X[idx[j]]
        new_X.append(xi + l[:, None] * (xj - xi))
        new_y.append(np.full(need, c))
        par.append(idx[i])
        nbr.append(idx[j])
        lams.append(l)
    if not new_X:
        e = np.zeros(0, dtype=np.int64)
        return SmoteResult(X.copy(), y.copy(), e, e, np.zeros(0), len(X))
    return SmoteResult(
        X=np.vstack([X] + new_X),
        y=np.concatenate([y] + new_y),
        parent=np.concatenate(par),
        neighbor=np.concatenate(nbr),
        lam=np.concatenate(lams),
        n_original=len(X),
    )
