"""Feed-forward network (200 -> 128 -> 64 -> 32 -> out) trained with Adam.

Hidden layers use ReLU.  The classification head (out = 3) applies a
softmax; the regression head (out = 1) applies ReLU, which pins predictions
to be non-negative, so regression targets whose training minimum is not
positive are shifted by a stored offset that is undone at prediction time.

Training minimizes the batch-mean squared error or cross-entropy, summed
over the mini-batches of an epoch, with the Adam moment updates

    s <- rho1*s + (1 - rho1)*g        r <- rho2*r + (1 - rho2)*g*g
    theta <- theta - lr * (s/(1-rho1^t)) / (sqrt(r/(1-rho2^t)) + 1e-8)

using rho1 = 0.9, rho2 = 0.999.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

HIDDEN_SIZES = (128, 64, 32)
N_INPUTS = 200
ADAM_RHO1 = 0.9
ADAM_RHO2 = 0.999
ADAM_EPS = 1e-8
PROB_FLOOR = 1e-12

TASKS = ("regression", "classification")


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class NetConfig:
    task: str = "regression"
    learning_rate: float = 1e-5
    batch_size: int = 64
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if not 1e-6 <= self.learning_rate <= 1e-4:
            raise ValueError("learning_rate must lie in [1e-6, 1e-4]")
        if self.batch_size not in (32, 64):
            raise ValueError("batch_size must be 32 or 64")
        if not 1 <= self.epochs <= 3000:
            raise ValueError("epochs must lie in [1, 3000]")

    @property
    def n_outputs(self) -> int:
        return 3 if self.task == "classification" else 1

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (N_INPUTS, *HIDDEN_SIZES, self.n_outputs)


Params = List[Tuple[np.ndarray, np.ndarray]]  # (W, b) per layer


def init_params(config: NetConfig, output_bias: float = 0.0) -> Params:
    """He-scaled Gaussian weights (std sqrt(2/fan_in)), zero biases.

    ``output_bias`` seeds the head bias; regression training passes the mean
    training target so the ReLU head starts inside its active region (a zero
    bias lets the head die on small positive targets).
    """
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    params[-1][1][:] = output_bias
    return params


def relu(x):
    return np.maximum(x, 0.0)


def softmax(z):
    """Row-wise softmax, stabilized by subtracting the row maximum."""
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: Params, X, task: str):
    """Network output plus the per-layer pre-activations needed by backward.

    Regression returns shape (B,), classification (B, 3) softmax rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params[0][0].shape[0]:
        raise ValueError(f"expected input width {params[0][0].shape[0]}")
    acts = [X]
    zs = []
    a = X
    for layer, (W, b) in enumerate(params):
        z = a @ W + b
        if not np.all(np.isfinite(z)):
            raise FloatingPointError(f"non-finite activation in layer {layer}")
        zs.append(z)
        if layer < len(params) - 1:
            a = relu(z)
        elif task == "classification":
            a = softmax(z)
        else:
            a = relu(z)
        acts.append(a)
    out = acts[-1][:, 0] if task == "regression" else acts[-1]
    return out, (acts, zs)


def loss_value(outputs, targets, task: str) -> float:
    """Batch-mean squared error, or batch-mean cross-entropy with the
    probability floor guarding log(0)."""
    if task == "regression":
        outputs = np.asarray(outputs, dtype=float).reshape(-1)
        targets = np.asarray(targets, dtype=float).reshape(-1)
        if outputs.shape != targets.shape:
            raise ValueError("shape mismatch")
        return float(np.mean((outputs - targets) ** 2))
    probs = np.asarray(outputs, dtype=float)
    onehot = _as_onehot(targets, probs.shape[1])
    if probs.shape != onehot.shape:
        raise ValueError("shape mismatch")
    return float(-np.mean(np.sum(
        onehot * np.log(np.maximum(probs, PROB_FLOOR)), axis=1)))


def _as_onehot(targets, n_classes):
    targets = np.asarray(targets)
    if targets.ndim == 1:
        onehot = np.zeros((targets.size, n_classes))
        onehot[np.arange(targets.size), targets.astype(int)] = 1.0
        return onehot
    return targets.astype(float)


def backward(params: Params, cache, targets, task: str):
    """Exact reverse-mode gradients of :func:`loss_value` (ReLU subgradient
    0 at the kink)."""
    acts, zs = cache
    B = acts[0].shape[0]
    if task == "classification":
        onehot = _as_onehot(targets, params[-1][0].shape[1])
        delta = (acts[-1] - onehot) / B
    else:
        y = np.asarray(targets, dtype=float).reshape(-1, 1)
        delta = (2.0 / B) * (acts[-1] - y) * (zs[-1] > 0.0)
    grads = [None] * len(params)
    for layer in range(len(params) - 1, -1, -1):
        grads[layer] = (acts[layer].T @ delta, delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ params[layer][0].T) * (zs[layer - 1] > 0.0)
    return grads


@dataclass
class AdamState:
    s: Params = None
    r: Params = None
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(s=[(np.zeros_like(W), np.zeros_like(b)) for W, b in params],
                   r=[(np.zeros_like(W), np.zeros_like(b)) for W, b in params],
                   t=0)


def adam_step(params: Params, grads, state: AdamState, learning_rate: float) -> Params:
    """One Adam update; mutates ``state`` and returns the new parameters."""
    state.t += 1
    c1 = 1.0 - ADAM_RHO1 ** state.t
    c2 = 1.0 - ADAM_RHO2 ** state.t
    new_params = []
    for layer, (W, b) in enumerate(params):
        updated = []
        for idx, theta in enumerate((W, b)):
            g = grads[layer][idx]
            s = state.s[layer][idx]
            r = state.r[layer][idx]
            s *= ADAM_RHO1
            s += (1.0 - ADAM_RHO1) * g
            r *= ADAM_RHO2
            r += (1.0 - ADAM_RHO2) * g * g
            updated.append(theta - learning_rate * (s / c1)
                           / (np.sqrt(r / c2) + ADAM_EPS))
        new_params.append((updated[0], updated[1]))
    return new_params


@dataclass
class NetModel:
    config: NetConfig
    params: Params
    target_offset: float = 0.0


@dataclass
class TrainResult:
    model: NetModel
    loss_curve: np.ndarray        # per-epoch training cost (sum of batch means)
    val_curve: np.ndarray         # per-epoch val MSE or accuracy (nan if no val)


def train(X, y, config: NetConfig, splits: Optional[Dict[str, np.ndarray]] = None
          ) -> TrainResult:
    """Mini-batch Adam training; deterministic given ``config.seed``.

    ``splits`` may carry "train"/"val" row-index arrays (defaults to all
    rows training, no validation).  Regression targets with a non-positive
    training minimum are shifted by a stored offset (undone at prediction).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    train_idx = (np.asarray(splits["train"]) if splits and "train" in splits
                 else np.arange(X.shape[0]))
    val_idx = (np.asarray(splits["val"]) if splits and "val" in splits
               else np.array([], dtype=int))
    Xtr, ytr = X[train_idx], y[train_idx]

    offset = 0.0
    output_bias = 0.0
    if config.task == "regression":
        ytr = ytr.astype(float)
        y_min, y_max = float(ytr.min()), float(ytr.max())
        if y_min <= 0.0:
            offset = 0.1 * (y_max - y_min) - y_min
            if offset <= 0.0:
                offset = 1.0 - y_min
        ytr = ytr + offset
        output_bias = float(ytr.mean())

    params = init_params(config, output_bias=output_bias)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(config.seed)
    n = Xtr.shape[0]
    loss_curve = np.empty(config.epochs)
    val_curve = np.full(config.epochs, np.nan)

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_cost = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            out, cache = forward(params, Xtr[batch], config.task)
            epoch_cost += loss_value(out, ytr[batch], config.task)
            grads = backward(params, cache, ytr[batch], config.task)
            params = adam_step(params, grads, state, config.learning_rate)
        if not np.isfinite(epoch_cost):
            raise TrainingDivergedError(epoch)
        loss_curve[epoch] = epoch_cost
        if val_idx.size:
            model = NetModel(config=config, params=params, target_offset=offset)
            if config.task == "classification":
                val_curve[epoch] = float(np.mean(
                    predict(model, X[val_idx]) == y[val_idx]))
            else:
                val_curve[epoch] = float(np.mean(
                    (predict(model, X[val_idx]) - y[val_idx]) ** 2))
    model = NetModel(config=config, params=params, target_offset=offset)
    return TrainResult(model=model, loss_curve=loss_curve, val_curve=val_curve)


def predict(model: NetModel, X) -> np.ndarray:
    """Regression values (offset undone) or integer class labels."""
    out, _ = forward(model.params, X, model.config.task)
    if model.config.task == "regression":
        return out - model.target_offset
    return np.argmax(out, axis=1)


def predict_proba(model: NetModel, X) -> np.ndarray:
    if model.config.task != "classification":
        raise ValueError("probabilities are only defined for classification")
    out, _ = forward(model.params, X, model.config.task)
    return out


def net_to_json(model: NetModel) -> str:
    doc = {
        "kind": "ffnn",
        "config": {
            "task": model.config.task,
            "learning_rate": model.config.learning_rate,
            "batch_size": model.config.batch_size,
            "epochs": model.config.epochs,
            "seed": model.config.seed,
        },
        "layer_sizes": list(model.config.layer_sizes),
        "target_offset": model.target_offset,
        "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in model.params],
    }
    return json.dumps(doc)


def net_from_json(text: str) -> NetModel:
    doc = json.loads(text)
    if doc.get("kind") != "ffnn":
        raise ValueError("not an FFNN model file")
    params = [(np.array(layer["W"]), np.array(layer["b"]))
              for layer in doc["layers"]]
    return NetModel(config=NetConfig(**doc["config"]), params=params,
                    target_offset=doc["target_offset"])
