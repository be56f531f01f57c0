"""Dense ReLU network with dropout and softmax output, trained with Adam."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

MODEL_KIND = "mlp"
MODEL_VERSION = 1
PROB_CLIP = 1e-12


@dataclass
class MlpConfig:
    n_inputs: int = 16
    hidden: tuple[int, ...] = (20, 16, 8, 4)
    n_outputs: int = 4
    relu_layers: int = 3  # the first dense layers with ReLU; later hidden layers are linear
    dropout: float = 0.10
    dropout_after: tuple[int, ...] = (0, 1)  # hidden layer indices followed by dropout
    batch_size: int = 256
    epochs: int = 1000
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    decay: float = 0.0
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        self.dropout_after = tuple(self.dropout_after)
        if any(w < 1 for w in self.hidden) or self.n_outputs < 1 or self.n_inputs < 1:
            raise ValueError("layer widths must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def widths(self) -> list[int]:
        return [self.n_inputs, *self.hidden, self.n_outputs]


@dataclass
class MlpParams:
    W: list[np.ndarray]
    b: list[np.ndarray]
    mW: list[np.ndarray] = field(default_factory=list)
    vW: list[np.ndarray] = field(default_factory=list)
    mb: list[np.ndarray] = field(default_factory=list)
    vb: list[np.ndarray] = field(default_factory=list)
    step: int = 0
    x_mean: np.ndarray | None = None
    x_scale: np.ndarray | None = None

    def __post_init__(self):
        if not self.mW:
            self.mW = [np.zeros_like(w) for w in self.W]
            self.vW = [np.zeros_like(w) for w in self.W]
            self.mb = [np.zeros_like(b) for b in self.b]
            self.vb = [np.zeros_like(b) for b in self.b]

    def copy(self) -> "MlpParams":
        c = lambda xs: [x.copy() for x in xs]
        return MlpParams(c(self.W), c(self.b), c(self.mW), c(self.vW), c(self.mb), c(self.vb), self.step,
                         None if self.x_mean is None else self.x_mean.copy(),
                         None if self.x_scale is None else self.x_scale.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.W, self.b) for a in pair])


def init_params(cfg: MlpConfig, rng: np.random.Generator | None = None) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = rng or np.random.default_rng(cfg.seed)
    w = cfg.widths
    W = [rng.uniform(-1, 1, (a, b)) / np.sqrt(a) for a, b in zip(w[:-1], w[1:])]
    return MlpParams(W, [np.zeros(b) for b in w[1:]])


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _scale(params: MlpParams, X):
    if params.x_mean is None:
        return X
    return (X - params.x_mean) / params.x_scale


def forward(params: MlpParams, X, cfg: MlpConfig, train_mode: bool = False, rng=None, cache: dict | None = None):
    """Class probabilities for the rows of ``X``.

    Inverted dropout is applied only in ``train_mode``; pass ``cache`` to keep
    the activations and masks needed by :func:`backward`.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != cfg.n_inputs:
        raise ValueError(f"expected {cfg.n_inputs} input features, got shape {X.shape}")
    if train_mode and cfg.dropout > 0 and rng is None:
        raise ValueError("train_mode dropout needs an rng")
    a = _scale(params, X)
    acts, pre, masks = [a], [], []
    L = len(params.W)
    for i in range(L):
        z = a @ params.W[i] + params.b[i]
        pre.append(z)
        if i == L - 1:
            a = softmax(z)
        else:
            a = np.maximum(z, 0.0) if i < cfg.relu_layers else z
            m = None
            if train_mode and cfg.dropout > 0 and i in cfg.dropout_after:
                m = (rng.random(a.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
                a = a * m
            masks.append(m)
        acts.append(a)
    if cache is not None:
        cache.update(acts=acts, pre=pre, masks=masks)
    return a


def cross_entropy(p_true, q_pred) -> float:
    """Mean over rows of ``-sum_x p(x) log q(x)``, with ``q`` clipped to [1e-12, 1]."""
    p = np.asarray(p_true, dtype=float)
    q = np.asarray(q_pred, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    return float(-np.sum(p * np.log(np.clip(q, PROB_CLIP, 1.0))) / len(p))


def one_hot(y, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[np.asarray(y, dtype=np.int64)]


def backward(params: MlpParams, cache: dict, Y: np.ndarray, cfg: MlpConfig):
    """Gradients of the mean cross-entropy for the cached forward pass."""
    acts, pre, masks = cache["acts"], cache["pre"], cache["masks"]
    n = len(Y)
    L = len(params.W)
    gW, gb = [None] * L, [None] * L
    delta = (acts[-1] - Y) / n
    for i in range(L - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i == 0:
            break
        delta = delta @ params.W[i].T
        j = i - 1  # hidden layer feeding layer i
        if masks[j] is not None:
            delta = delta * masks[j]
        if j < cfg.relu_layers:
            delta = delta * (pre[j] > 0)
    return gW, gb


def adam_step(params: MlpParams, gW, gb, cfg: MlpConfig) -> MlpParams:
    """Bias-corrected Adam update, in place. Returns ``params``."""
    params.step += 1
    t = params.step
    lr = cfg.learning_rate / (1.0 + cfg.decay * (t - 1))
    b1, b2, eps = cfg.beta1, cfg.beta2, cfg.epsilon
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    for P, G, M, V in ((params.W, gW, params.mW, params.vW), (params.b, gb, params.mb, params.vb)):
        for k in range(len(P)):
            M[k] = b1 * M[k] + (1 - b1) * G[k]
            V[k] = b2 * V[k] + (1 - b2) * G[k] * G[k]
            P[k] = P[k] - lr * (M[k] / c1) / (np.sqrt(V[k] / c2) + eps)
    return params


def predict_proba(params, X, cfg):
    return forward(params, X, cfg, train_mode=False)


def predict(params, X, cfg):
    return np.argmax(predict_proba(params, X, cfg), axis=1)


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def to_csv(self, path):
        with open(path, "w") as f:
            f.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
            for e in range(len(self)):
                vl = self.val_loss[e] if self.val_loss else float("nan")
                va = self.val_acc[e] if self.val_acc else float("nan")
                f.write(f"{e + 1},{self.train_loss[e]!r},{self.train_acc[e]!r},{vl!r},{va!r}\n")


def _eval(params, X, y, cfg):
    q = predict_proba(params, X, cfg)
    return cross_entropy(one_hot(y, cfg.n_outputs), q), float(np.mean(np.argmax(q, axis=1) == y))


def train_mlp(X, y, cfg: MlpConfig = MlpConfig(), X_val=None, y_val=None, params: MlpParams | None = None):
    """Mini-batch Adam for ``cfg.epochs`` epochs; returns ``(params, history)``.

    Training loss/accuracy are measured in eval mode after each epoch.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty training set")
    ss = np.random.SeedSequence(cfg.seed)
    r_init, r_shuf, r_drop = (np.random.default_rng(s) for s in ss.spawn(3))
    if params is None:
        params = init_params(cfg, r_init)
        if cfg.standardize:
            params.x_mean = X.mean(axis=0)
            sd = X.std(axis=0)
            params.x_scale = np.where(sd > 0, sd, 1.0)
    Y = one_hot(y, cfg.n_outputs)
    hist = History()
    for _ in range(cfg.epochs):
        perm = r_shuf.permutation(len(X))
        for a in range(0, len(X), cfg.batch_size):
            bi = perm[a:a + cfg.batch_size]
            cache = {}
            forward(params, X[bi], cfg, True, r_drop, cache)
            gW, gb = backward(params, cache, Y[bi], cfg)
            adam_step(params, gW, gb, cfg)
        l, acc = _eval(params, X, y, cfg)
        hist.train_loss.append(l)
        hist.train_acc.append(acc)
        if X_val is not None and len(X_val):
            l, acc = _eval(params, X_val, np.asarray(y_val), cfg)
            hist.val_loss.append(l)
            hist.val_acc.append(acc)
    return params, hist


@dataclass
class MlpModel:
    cfg: MlpConfig
    params: MlpParams

    def predict_proba(self, X):
        return predict_proba(self.params, X, self.cfg)

    def predict(self, X):
        return predict(self.params, X, self.cfg)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "kind": MODEL_KIND,
            "version": MODEL_VERSION,
            "config": asdict(self.cfg),
            "layers": [
                {"shape": list(W.shape), "weights": W.ravel().tolist(), "bias": b.tolist()}
                for W, b in zip(p.W, p.b)
            ],
            "x_mean": None if p.x_mean is None else p.x_mean.tolist(),
            "x_scale": None if p.x_scale is None else p.x_scale.tolist(),
            "adam_step": p.step,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        if d.get("kind") != MODEL_KIND or d.get("version") != MODEL_VERSION:
            raise ValueError(f"not a version-{MODEL_VERSION} MLP model")
        cfg = MlpConfig(**d["config"])
        W = [np.array(l["weights"], dtype=float).reshape(l["shape"]) for l in d["layers"]]
        b = [np.array(l["bias"], dtype=float) for l in d["layers"]]
        p = MlpParams(W, b, step=d.get("adam_step", 0))
        if d.get("x_mean") is not None:
            p.x_mean, p.x_scale = np.array(d["x_mean"]), np.array(d["x_scale"])
        return cls(cfg, p)

    def save(self, path, extra: dict | None = None):
        d = self.to_dict()
        if extra:
            d["meta"] = extra
        with open(path, "w") as f:
            json.dump(d, f, separators=(",", ":"), sort_keys=True)

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))
