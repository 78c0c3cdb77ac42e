"""Small differentiable classifiers and the local SGD trainer run by clients.

Models are multinomial logistic regression (no hidden layers) or a dense
MLP with relu/tanh activations and a softmax head, trained with mean
cross-entropy.  Forward, loss, and gradient are all exact closed-form
numpy, which keeps client training deterministic and cheap enough to
finite-difference in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import ShapeMismatchError
from .params import ParamVector, ShapeManifest

if TYPE_CHECKING:
    from .data import Dataset

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; the parameter manifest derives from it."""

    input_dim: int
    hidden_dims: tuple[int, ...] = ()
    activation: str = "relu"
    num_classes: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden layer widths must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per dense layer, output layer last."""
        widths = [self.input_dim, *self.hidden_dims, self.num_classes]
        return [(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]

    def manifest(self) -> ShapeManifest:
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for i, (fan_in, fan_out) in enumerate(self.layer_dims()):
            shapes.append((f"dense{i}.weight", (fan_in, fan_out)))
            shapes.append((f"dense{i}.bias", (fan_out,)))
        return ShapeManifest.from_shapes(shapes)

    @property
    def num_params(self) -> int:
        return self.manifest().total_size


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    batch_size: int = 16
    local_epochs: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        # lr = 0 is allowed so the zero-step identity is testable.
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")


def init_params(spec: ModelSpec, seed: int) -> ParamVector:
    """Seeded initialization: weights uniform in +-1/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(seed)
    flat = []
    for fan_in, fan_out in spec.layer_dims():
        bound = 1.0 / np.sqrt(fan_in)
        flat.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).reshape(-1))
        flat.append(np.zeros(fan_out))
    return ParamVector(np.concatenate(flat), spec.manifest())


def _layers(params: ParamVector, spec: ModelSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    tensors = params.to_tensors()
    return [
        (tensors[f"dense{i}.weight"], tensors[f"dense{i}.bias"])
        for i in range(len(spec.layer_dims()))
    ]


def _check_features(spec: ModelSpec, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeMismatchError(
            f"features must be (n, {spec.input_dim}), got {x.shape}"
        )
    return x


def _forward(params: ParamVector, spec: ModelSpec, x: np.ndarray):
    """Returns (per-layer inputs, pre-activations, logits)."""
    layers = _layers(params, spec)
    inputs = [x]
    pre_acts = []
    h = x
    for k, (w, b) in enumerate(layers):
        z = h @ w + b
        pre_acts.append(z)
        if k < len(layers) - 1:
            h = np.maximum(z, 0.0) if spec.activation == "relu" else np.tanh(z)
            inputs.append(h)
    return inputs, pre_acts, pre_acts[-1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def predict_proba(params: ParamVector, spec: ModelSpec, features: np.ndarray) -> np.ndarray:
    """Row-wise class probabilities from the softmax head."""
    x = _check_features(spec, features)
    _, _, logits = _forward(params, spec, x)
    return _softmax(logits)


def _check_labels(spec: ModelSpec, labels: np.ndarray, n_rows: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (n_rows,):
        raise ValueError(f"labels must have shape ({n_rows},), got {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= spec.num_classes):
        raise ValueError(
            f"labels must lie in [0, {spec.num_classes}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y.astype(np.int64)


def loss_and_gradient(
    params: ParamVector, spec: ModelSpec, features: np.ndarray, labels: np.ndarray
) -> tuple[float, ParamVector]:
    """Mean cross-entropy over the batch and its exact gradient."""
    x = _check_features(spec, features)
    y = _check_labels(spec, labels, x.shape[0])
    n = x.shape[0]
    inputs, pre_acts, logits = _forward(params, spec, x)

    # Stable mean cross-entropy via log-sum-exp.
    max_logit = logits.max(axis=1, keepdims=True)
    log_norm = max_logit[:, 0] + np.log(np.exp(logits - max_logit).sum(axis=1))
    loss = float(np.mean(log_norm - logits[np.arange(n), y]))

    probs = _softmax(logits)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n

    layers = _layers(params, spec)
    grads: list[np.ndarray | None] = [None] * (2 * len(layers))
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        grads[2 * k] = inputs[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            upstream = delta @ w.T
            z = pre_acts[k - 1]
            if spec.activation == "relu":
                delta = upstream * (z > 0)
            else:
                delta = upstream * (1.0 - np.tanh(z) ** 2)
    flat = np.concatenate([g.reshape(-1) for g in grads])
    return loss, ParamVector(flat, params.manifest)


def sgd_train(
    params: ParamVector, spec: ModelSpec, dataset: "Dataset", config: TrainConfig
) -> ParamVector:
    """Mini-batch SGD for ``local_epochs`` epochs with seeded shuffling.

    Pure function of its arguments: the same (params, dataset, config)
    always returns the same vector.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    values = params.values.copy()
    n = len(dataset)
    for _ in range(config.local_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            # Sorted batch indices keep the full-batch case bit-identical to
            # a single loss_and_gradient step.
            batch = np.sort(perm[start : start + config.batch_size])
            current = ParamVector(values, params.manifest)
            _, grad = loss_and_gradient(
                current, spec, dataset.features[batch], dataset.labels[batch]
            )
            values = values - config.learning_rate * grad.values
    return ParamVector(values, params.manifest)


def evaluate(params: ParamVector, spec: ModelSpec, dataset: "Dataset") -> dict[str, float]:
    """Accuracy (argmax, ties to the lowest class index) and mean cross-entropy."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    x = _check_features(spec, dataset.features)
    y = _check_labels(spec, dataset.labels, x.shape[0])
    _, _, logits = _forward(params, spec, x)
    predictions = np.argmax(logits, axis=1)
    accuracy = float(np.mean(predictions == y))
    max_logit = logits.max(axis=1, keepdims=True)
    log_norm = max_logit[:, 0] + np.log(np.exp(logits - max_logit).sum(axis=1))
    loss = float(np.mean(log_norm - logits[np.arange(x.shape[0]), y]))
    return {"accuracy": accuracy, "loss": loss}
