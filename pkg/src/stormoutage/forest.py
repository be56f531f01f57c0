"""Random forest classifier with Gini splits, written against numpy only."""

from __future__ import annotations

import heapq
import json
from dataclasses import asdict, dataclass, field

import numpy as np

MODEL_KIND = "random_forest"
MODEL_VERSION = 1


def gini_impurity(class_counts) -> float:
    """``sum_i p_i (1 - p_i)`` over the class shares of ``class_counts``."""
    c = np.asarray(class_counts, dtype=float)
    if np.any(c < 0):
        raise ValueError("class counts must be non-negative")
    n = c.sum()
    if n <= 0:
        raise ValueError("gini impurity of an empty node is undefined")
    p = c / n
    return float(np.sum(p * (1.0 - p)))


@dataclass
class RfcHyperparams:
    n_trees: int = 200
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features_per_split: int = 4
    max_leaf_nodes: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 1 <= self.max_features_per_split <= 16:
            raise ValueError("max_features_per_split must be in 1..16")
        if self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise ValueError("min_samples_split >= 2 and min_samples_leaf >= 1 required")
        if self.max_leaf_nodes is not None and self.max_leaf_nodes < 2:
            raise ValueError("max_leaf_nodes must be >= 2")


@dataclass
class Tree:
    """Flat node arrays; ``left == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, n_classes) training class counts reaching the node
    importance: np.ndarray  # unnormalized impurity decrease per feature

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.left < 0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.left[node] >= 0)
        while len(active):
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.left[node[active]] >= 0]
        return node

    def leaf_proba(self) -> np.ndarray:
        c = self.counts.astype(float)
        return c / c.sum(axis=1, keepdims=True)

    def predict_proba(self, X):
        return self.leaf_proba()[self.apply(X)]

    def to_nested(self, node: int = 0) -> dict:
        if self.left[node] < 0:
            return {"counts": self.counts[node].tolist()}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "counts": self.counts[node].tolist(),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, d: dict, n_features: int) -> "Tree":
        feat, thr, left, right, counts = [], [], [], [], []
        imp = np.zeros(n_features)
        stack = [(d, None, None)]
        while stack:
            nd, parent, side = stack.pop()
            i = len(feat)
            if parent is not None:
                (left if side == "l" else right)[parent] = i
            feat.append(int(nd.get("feature", -1)))
            thr.append(float(nd.get("threshold", 0.0)))
            left.append(-1)
            right.append(-1)
            counts.append(nd["counts"])
            if "left" in nd:
                stack.append((nd["right"], i, "r"))
                stack.append((nd["left"], i, "l"))
        tree = cls(np.array(feat), np.array(thr), np.array(left), np.array(right), np.array(counts, dtype=np.int64), imp)
        tree.importance = _importance_from_counts(tree, n_features)
        return tree


def _weighted_gini(c: np.ndarray) -> float:
    n = c.sum()
    return float(n - np.dot(c, c) / n) if n else 0.0


def _importance_from_counts(tree: Tree, n_features: int) -> np.ndarray:
    imp = np.zeros(n_features)
    for i in np.flatnonzero(tree.left >= 0):
        c = tree.counts
        imp[tree.feature[i]] += _weighted_gini(c[i]) - _weighted_gini(c[tree.left[i]]) - _weighted_gini(c[tree.right[i]])
    return imp


def best_split(X, y_onehot, idx, features, min_samples_leaf):
    """Best ``(score, feature, threshold, n_left)`` over ``features``, or None.

    ``score`` is the summed weighted child impurity ``n_L*G_L + n_R*G_R``.
    Ties go to the lower feature index, then the lower threshold.
    """
    best = None
    n = len(idx)
    Yn = y_onehot[idx]
    total = Yn.sum(axis=0)
    for f in features:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        valid = np.flatnonzero(xs[1:] > xs[:-1])
        if len(valid) == 0:
            continue
        nl = valid + 1
        keep = (nl >= min_samples_leaf) & (n - nl >= min_samples_leaf)
        if not keep.any():
            continue
        valid, nl = valid[keep], nl[keep]
        cum = np.cumsum(Yn[order], axis=0)[valid]
        right = total - cum
        nr = n - nl
        score = (nl - np.einsum("ij,ij->i", cum, cum) / nl) + (nr - np.einsum("ij,ij->i", right, right) / nr)
        k = int(np.argmin(score))  # first minimum = lowest threshold
        thr = 0.5 * (xs[valid[k]] + xs[valid[k] + 1])
        if thr >= xs[valid[k] + 1]:  # midpoint rounding between adjacent floats
            thr = xs[valid[k]]
        cand = (float(score[k]), int(f), float(thr), int(nl[k]))
        if best is None or _better(cand, best):
            best = cand
    return best


def _better(a, b, tol=1e-9):
    if a[0] < b[0] - tol * max(1.0, abs(b[0])):
        return True
    if abs(a[0] - b[0]) <= tol * max(1.0, abs(b[0])):
        return (a[1], a[2]) < (b[1], b[2])
    return False


def fit_tree(X, y, n_classes, hp: RfcHyperparams, rng: np.random.Generator, sample_idx=None) -> Tree:
    n, d = X.shape
    idx0 = np.arange(n) if sample_idx is None else np.asarray(sample_idx)
    onehot = np.eye(n_classes, dtype=np.int64)[y]
    feat, thr, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(onehot[idx].sum(axis=0))
        return len(feat) - 1

    def find_split(idx, depth):
        c = onehot[idx].sum(axis=0)
        if len(idx) < hp.min_samples_split or np.count_nonzero(c) <= 1:
            return None
        if hp.max_depth is not None and depth >= hp.max_depth:
            return None
        perm = rng.permutation(d)
        m = hp.max_features_per_split
        sp = best_split(X, onehot, idx, np.sort(perm[:m]), hp.min_samples_leaf)
        # all drawn features constant here: keep drawing until something splits
        pos = m
        while sp is None and pos < d:
            sp = best_split(X, onehot, idx, perm[pos:pos + 1], hp.min_samples_leaf)
            pos += 1
        return sp

    root = new_node(idx0)
    best_first = hp.max_leaf_nodes is not None
    frontier = []
    counter = 0

    def push(node, idx, depth):
        nonlocal counter
        sp = find_split(idx, depth)
        if sp is None:
            return
        gain = _weighted_gini(counts[node]) - sp[0]
        key = (-gain, counter) if best_first else counter
        counter += 1
        if best_first:
            heapq.heappush(frontier, (key, node, idx, depth, sp))
        else:
            frontier.append((key, node, idx, depth, sp))

    push(root, idx0, 0)
    n_leaves = 1
    while frontier:
        if best_first:
            _, node, idx, depth, sp = heapq.heappop(frontier)
            if n_leaves >= hp.max_leaf_nodes:
                break
        else:
            _, node, idx, depth, sp = frontier.pop()
        _, f, t, _ = sp
        go = X[idx, f] <= t
        li, ri = idx[go], idx[~go]
        feat[node], thr[node] = f, t
        l_node = new_node(li)
        r_node = new_node(ri)
        left[node], right[node] = l_node, r_node
        n_leaves += 1
        push(r_node, ri, depth + 1)
        push(l_node, li, depth + 1)

    tree = Tree(
        np.array(feat, dtype=np.int64), np.array(thr), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(counts, dtype=np.int64), np.zeros(d),
    )
    tree.importance = _importance_from_counts(tree, d)
    return tree


def _fit_one(X, y, n_classes, hp, seed_seq):
    rng = np.random.default_rng(seed_seq)
    boot = rng.integers(0, len(X), len(X))
    return fit_tree(X, y, n_classes, hp, rng, boot)


@dataclass
class RandomForestModel:
    hp: RfcHyperparams
    trees: list[Tree]
    n_features: int
    n_classes: int
    n_train: int
    tree_seeds: list = field(default_factory=list)

    def bootstrap_indices(self, t: int) -> np.ndarray:
        """Bootstrap rows drawn for tree ``t`` (reproduced from its seed)."""
        s = self.tree_seeds[t]
        rng = np.random.default_rng(np.random.SeedSequence(s["entropy"], spawn_key=tuple(s["spawn_key"])))
        return rng.integers(0, self.n_train, self.n_train)

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        X = self._check(X)
        out = np.zeros((len(X), self.n_classes))
        for t in self.trees:
            out += t.predict_proba(X)
        return out / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)  # first max = lower class on ties

    def feature_importance(self) -> np.ndarray:
        per_tree = []
        for t in self.trees:
            s = t.importance.sum()
            per_tree.append(t.importance / s if s > 0 else np.zeros(self.n_features))
        imp = np.mean(per_tree, axis=0)
        s = imp.sum()
        return imp / s if s > 0 else imp

    def to_dict(self) -> dict:
        return {
            "kind": MODEL_KIND,
            "version": MODEL_VERSION,
            "hyperparams": asdict(self.hp),
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "n_train": self.n_train,
            "tree_seeds": self.tree_seeds,
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForestModel":
        if d.get("kind") != MODEL_KIND or d.get("version") != MODEL_VERSION:
            raise ValueError(f"not a version-{MODEL_VERSION} random forest model")
        nf = d["n_features"]
        return cls(RfcHyperparams(**d["hyperparams"]), [Tree.from_nested(t, nf) for t in d["trees"]], nf,
                   d["n_classes"], d["n_train"], d.get("tree_seeds", []))

    def save(self, path, extra: dict | None = None):
        d = self.to_dict()
        if extra:
            d["meta"] = extra
        with open(path, "w") as f:
            json.dump(d, f, separators=(",", ":"), sort_keys=True)

    @classmethod
    def load(cls, path) -> "RandomForestModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def fit_forest(X, y, hp: RfcHyperparams = RfcHyperparams(), n_classes: int = 4, n_jobs: int = 1) -> RandomForestModel:
    """Bagged Gini trees. Every tree gets its own child seed, so the model
    does not depend on ``n_jobs``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty training set")
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain at least 2 classes")
    seqs = np.random.SeedSequence(hp.seed).spawn(hp.n_trees)
    if n_jobs == 1:
        trees = [_fit_one(X, y, n_classes, hp, s) for s in seqs]
    else:
        from joblib import Parallel, delayed

        trees = Parallel(n_jobs=n_jobs)(delayed(_fit_one)(X, y, n_classes, hp, s) for s in seqs)
    seeds = [{"entropy": s.entropy, "spawn_key": list(s.spawn_key)} for s in seqs]
    return RandomForestModel(hp, trees, X.shape[1], n_classes, len(X), seeds)


# -- hyperparameter search ------------------------------------------------------------

def stratified_folds(y, folds: int, seed: int = 0):
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > counts.min():
        raise ValueError(f"{folds} folds exceed the {counts.min()} samples of class {classes[np.argmin(counts)]}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        fold_of[idx] = np.arange(len(idx)) % folds
    return [(np.flatnonzero(fold_of != k), np.flatnonzero(fold_of == k)) for k in range(folds)]


DEFAULT_SPACE = {
    "n_trees": [50, 100, 200],
    "max_depth": [None, 10, 20, 40],
    "min_samples_split": [2, 5, 10],
    "min_samples_leaf": [1, 2, 4],
    "max_features_per_split": [2, 4, 8],
    "max_leaf_nodes": [None, 100, 1000],
}


def random_search_cv(X, y, space: dict | None = None, n_iter: int = 10, folds: int = 3, seed: int = 0,
                     fit_transform=None, n_jobs: int = 1):
    """Sample ``n_iter`` configurations uniformly from ``space`` and rank them by mean k-fold macro F1.

    ``fit_transform(X_train, y_train) -> (X', y')`` is applied to each training
    fold only (e.g. SMOTE). Returns ``(best_hp, results)`` where results list
    ``(hp, fold_scores, mean)`` in sampling order.
    """
    from .metrics import classification_metrics

    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    space = DEFAULT_SPACE if space is None else space
    splits = stratified_folds(y, folds, seed)
    rng = np.random.default_rng(seed)
    names = sorted(space)
    results = []
    for it in range(n_iter):
        params = {k: space[k][int(rng.integers(len(space[k])))] for k in names}
        hp = RfcHyperparams(seed=seed + it, **params)
        scores = []
        for tr, va in splits:
            Xt, yt = X[tr], y[tr]
            if fit_transform is not None:
                Xt, yt = fit_transform(Xt, yt)
            model = fit_forest(Xt, yt, hp, n_jobs=n_jobs)
            scores.append(classification_metrics(y[va], model.predict(X[va])).f1_macro)
        results.append((hp, scores, float(np.mean(scores))))
    best = max(range(len(results)), key=lambda i: (results[i][2], -i))
    return results[best][0], results
