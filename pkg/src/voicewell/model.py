"""Fully connected ReLU regression network trained with Adam on MSE.

Plain numpy: forward/backward passes are written out by hand so the
gradient check can compare them against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss

MODEL_FORMAT_VERSION = 1
# training arithmetic; gradient checks run in float64
TRAIN_DTYPE = np.float32


@dataclass(frozen=True)
class Hyperparams:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dropout: float = 0.5
    l2_lambda: float = 1e-4
    batch: int = 32
    epochs: int = 100
    hidden: tuple[int, ...] = (256, 256, 256, 256)


@dataclass
class RegressorModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    feature_names: tuple[str, ...] = ()
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None
    target_mean: float = 0.0
    target_std: float = 1.0
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    seed: int = 0

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[0]

    def standardize(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.feature_mean is None:
            return X
        return (X - self.feature_mean) / self.feature_std

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Raw features in, predictions in target units out (no dropout)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_in:
            raise DimensionMismatch(f"expected {self.n_in} features, got {X.shape[1]}")
        out = _forward(self.weights, self.biases, self.standardize(X))[0]
        return self.target_mean + self.target_std * out


@dataclass
class TrainReport:
    epoch_mse: list[float]
    epochs: int
    seed: int


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(sizes, rng: np.random.Generator) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights = [glorot_uniform(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return weights, biases


def _forward(weights, biases, X, masks=None):
    """Returns (output vector, cache of per-layer activations)."""
    acts = [X]
    pre = []
    h = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W + b
        pre.append(z)
        if i == last:
            h = z
        else:
            h = np.maximum(z, 0.0)
            if masks is not None:
                h = h * masks[i]
        acts.append(h)
    return h[:, 0], (acts, pre)


def forward(m: RegressorModel, x, train_mode: bool = False, rng: np.random.Generator | None = None):
    """Network output for standardized input ``x`` (vector or batch).

    In ``train_mode`` inverted dropout is applied after every hidden ReLU.
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != m.n_in:
        raise DimensionMismatch(f"expected {m.n_in} inputs, got {X.shape[1]}")
    masks = None
    if train_mode and m.hyperparams.dropout > 0:
        if rng is None:
            raise ValueError("train_mode needs an rng")
        masks = dropout_masks(m.weights, X.shape[0], m.hyperparams.dropout, rng)
    out = _forward(m.weights, m.biases, X, masks)[0]
    return float(out[0]) if single else out


def dropout_masks(weights, batch: int, rate: float, rng: np.random.Generator) -> list[np.ndarray]:
    keep = 1.0 - rate
    dtype = weights[0].dtype
    return [
        (rng.random((batch, W.shape[1]), dtype=np.float32) < keep).astype(dtype) * dtype.type(1.0 / keep)
        for W in weights[:-1]
    ]


def loss_and_grads(weights, biases, X, y, l2_lambda: float = 0.0, masks=None, out_grads=None):
    """Mean squared error + l2 * sum ||W||^2 and its gradients.

    Returns ``(total_loss, mse, grad_weights, grad_biases)``. ``out_grads``
    optionally supplies preallocated ``(grad_weights, grad_biases)`` arrays.
    """
    out, (acts, pre) = _forward(weights, biases, X, masks)
    n = X.shape[0]
    resid = out - y
    mse = float(np.mean(resid**2))
    penalty = l2_lambda * sum(float(np.vdot(W, W)) for W in weights)
    delta = (resid * resid.dtype.type(2.0 / n))[:, None]
    if out_grads is None:
        gW = [np.empty_like(W) for W in weights]
        gb = [np.empty_like(b) for b in biases]
    else:
        gW, gb = out_grads
    for i in range(len(weights) - 1, -1, -1):
        np.matmul(acts[i].T, delta, out=gW[i])
        if l2_lambda:
            gW[i] += weights[i] * weights[i].dtype.type(2.0 * l2_lambda)
        np.sum(delta, axis=0, out=gb[i])
        if i > 0:
            delta = delta @ weights[i].T
            if masks is not None:
                delta *= masks[i - 1]
            delta *= pre[i - 1] > 0.0
    return mse + penalty, mse, gW, gb


class Adam:
    """Adam with bias correction on one flat parameter vector (updated in place)."""

    def __init__(self, theta: np.ndarray, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.theta = theta
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros_like(theta)
        self.v = np.zeros_like(theta)
        self._tmp = np.empty_like(theta)
        self.t = 0

    def step(self, grad: np.ndarray) -> None:
        self.t += 1
        b1, b2, tmp = self.beta1, self.beta2, self._tmp
        self.m *= b1
        np.multiply(grad, self.theta.dtype.type(1.0 - b1), out=tmp)
        self.m += tmp
        self.v *= b2
        np.multiply(grad, grad, out=tmp)
        tmp *= 1.0 - b2
        self.v += tmp
        # theta -= lr * (m / c1) / (sqrt(v / c2) + eps)
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        np.divide(self.v, c2, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += self.eps
        np.divide(self.m, tmp, out=tmp)
        tmp *= self.lr / c1
        self.theta -= tmp


def _flat_views(sizes, dtype=np.float64) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """One contiguous buffer carved into per-layer weight and bias views."""
    shapes = [(a, b) for a, b in zip(sizes[:-1], sizes[1:])]
    total = sum(a * b + b for a, b in shapes)
    buf = np.zeros(total, dtype=dtype)
    weights, biases, pos = [], [], 0
    for a, b in shapes:
        weights.append(buf[pos : pos + a * b].reshape(a, b))
        pos += a * b
    for a, b in shapes:
        biases.append(buf[pos : pos + b])
        pos += b
    return buf, weights, biases


def fit_standardizer(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 1e-12 * np.maximum(np.abs(mean), 1.0), std, 1.0)
    return mean, std


def train(
    features,
    targets,
    hyperparams: Hyperparams = Hyperparams(),
    seed: int = 0,
    feature_names=(),
) -> tuple[RegressorModel, TrainReport]:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[0] != len(y):
        raise DimensionMismatch(f"features {X.shape} vs targets {y.shape}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteLoss("targets must be finite")
    hp = hyperparams
    mean, std = fit_standardizer(X)
    t_mean = float(y.mean())
    t_std = float(y.std())
    t_std = t_std if t_std > 1e-12 * max(abs(t_mean), 1.0) else 1.0
    Xs = (X - mean) / std
    ys = (y - t_mean) / t_std

    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *hp.hidden, 1]
    theta, weights, biases = _flat_views(sizes, TRAIN_DTYPE)
    init_w, init_b = init_params(sizes, rng)
    for dst, src in zip(weights + biases, init_w + init_b):
        dst[...] = src
    grad, gW, gb = _flat_views(sizes, TRAIN_DTYPE)
    Xs = Xs.astype(TRAIN_DTYPE)
    ys = ys.astype(TRAIN_DTYPE)
    opt = Adam(theta, hp.lr, hp.beta1, hp.beta2, hp.eps)

    history = []
    n = X.shape[0]
    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hp.batch):
            idx = order[start : start + hp.batch]
            masks = dropout_masks(weights, len(idx), hp.dropout, rng) if hp.dropout > 0 else None
            loss, mse, _, _ = loss_and_grads(weights, biases, Xs[idx], ys[idx], hp.l2_lambda, masks, (gW, gb))
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} in epoch {epoch + 1}")
            opt.step(grad)
            total += mse * len(idx)
        history.append(total / n)
        if not np.all(np.isfinite(theta)):
            raise NonFiniteLoss(f"non-finite parameters after epoch {epoch + 1}")

    weights = [W.astype(np.float64) for W in weights]
    biases = [b.astype(np.float64) for b in biases]
    model = RegressorModel(
        weights=weights,
        biases=biases,
        feature_names=tuple(feature_names),
        feature_mean=mean,
        feature_std=std,
        target_mean=t_mean,
        target_std=t_std,
        hyperparams=hp,
        seed=seed,
    )
    return model, TrainReport(history, len(history), seed)


def gradient_check(
    sizes=(5, 4, 1),
    X: np.ndarray | None = None,
    y: np.ndarray | None = None,
    l2_lambda: float = 0.0,
    seed: int = 0,
    h: float = 1e-5,
    params: tuple[list[np.ndarray], list[np.ndarray]] | None = None,
) -> float:
    """Largest relative disagreement between backprop and central differences."""
    rng = np.random.default_rng(seed)
    if params is None:
        weights, biases = init_params(list(sizes), rng)
        biases = [rng.normal(0.0, 0.1, size=b.shape) for b in biases]
    else:
        weights, biases = [w.copy() for w in params[0]], [b.copy() for b in params[1]]
    if X is None:
        X = rng.normal(size=(8, weights[0].shape[0]))
    if y is None:
        y = rng.normal(size=X.shape[0])
    _, _, gW, gb = loss_and_grads(weights, biases, X, y, l2_lambda)
    worst = 0.0
    for p, g in zip(weights + biases, gW + gb):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = p[i]
            p[i] = orig + h
            up = loss_and_grads(weights, biases, X, y, l2_lambda)[0]
            p[i] = orig - h
            down = loss_and_grads(weights, biases, X, y, l2_lambda)[0]
            p[i] = orig
            num = (up - down) / (2.0 * h)
            denom = max(abs(num), abs(g[i]), 1e-8)
            worst = max(worst, abs(num - g[i]) / denom)
    return worst


# --------------------------------------------------------------------------
# persistence


def save_model(m: RegressorModel, path: str | Path) -> None:
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_names": list(m.feature_names),
        "target_mean": m.target_mean,
        "target_std": m.target_std,
        "hyperparams": {**asdict(m.hyperparams), "hidden": list(m.hyperparams.hidden)},
        "seed": m.seed,
        "shapes": [list(W.shape) for W in m.weights],
    }
    arrays = {f"W{i}": W for i, W in enumerate(m.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(m.biases)})
    if m.feature_mean is not None:
        arrays["feature_mean"] = m.feature_mean
        arrays["feature_std"] = m.feature_std
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_model(path: str | Path) -> RegressorModel:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format {meta.get('format_version')}")
        n = len(meta["shapes"])
        weights = [z[f"W{i}"].copy() for i in range(n)]
        biases = [z[f"b{i}"].copy() for i in range(n)]
        mean = z["feature_mean"].copy() if "feature_mean" in z else None
        std = z["feature_std"].copy() if "feature_std" in z else None
    for W, shape in zip(weights, meta["shapes"]):
        if list(W.shape) != shape:
            raise ValueError(f"{path}: weight shape {W.shape} != declared {shape}")
    hp = meta["hyperparams"]
    hp["hidden"] = tuple(hp["hidden"])
    return RegressorModel(
        weights=weights,
        biases=biases,
        feature_names=tuple(meta["feature_names"]),
        feature_mean=mean,
        feature_std=std,
        target_mean=meta["target_mean"],
        target_std=meta["target_std"],
        hyperparams=Hyperparams(**hp),
        seed=meta["seed"],
    )


def with_overrides(hp: Hyperparams, **kw) -> Hyperparams:
    return replace(hp, **{k: v for k, v in kw.items() if v is not None})
