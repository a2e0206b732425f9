"""Classical layers, losses, Adam, and the two models.

H-FQNN: dense(F->F) ReLU -> dense(F->q) ReLU -> VQC -> dense(q->2)
FNN:    dense(F->F) ReLU -> dense(F->q) ReLU -> dense(q->q) ReLU -> dense(q->2)

Parameters live in a flat ``dict[str, np.ndarray]``; gradients use the same keys.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import metrics, vqc
from .data import FeatureMatrix, encode_labels
from .errors import (
    ConfigError,
    DataError,
    IncompatibleCheckpointError,
    ShapeError,
    TrainingError,
)

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
_PREDICT_CHUNK = 4096


class ModelKind(str, Enum):
    HFQNN = "hfqnn"
    FNN = "fnn"


class LossKind(str, Enum):
    BCE = "bce"
    CE = "ce"


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    n_features: int
    width: int  # qubits for H-FQNN, hidden units of the replacement layer for FNN
    n_layers: int = 2
    ranges: tuple[int, ...] | None = None
    # "none" feeds ReLU activations to RX unchanged; "tanh_pi" maps them to pi * tanh(h)
    input_scaling: str = "none"
    n_outputs: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.n_outputs != 2:
            raise ConfigError("models have exactly 2 output neurons")
        if self.n_features < 1 or self.width < 1:
            raise ConfigError(f"n_features and width must be positive, got {self.n_features}, {self.width}")
        if self.input_scaling not in ("none", "tanh_pi"):
            raise ConfigError(f"unknown input scaling {self.input_scaling!r}")
        if self.kind is ModelKind.HFQNN:
            circ = vqc.CircuitSpec(self.width, self.n_layers, self.ranges)
            object.__setattr__(self, "ranges", circ.ranges)

    @property
    def circuit(self) -> vqc.CircuitSpec | None:
        if self.kind is ModelKind.FNN:
            return None
        return vqc.CircuitSpec(self.width, self.n_layers, self.ranges)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["ranges"] = None if self.ranges is None else list(self.ranges)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        if d.get("ranges") is not None:
            d["ranges"] = tuple(d["ranges"])
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    learning_rate: float = 0.02
    batch_size: int = 64
    loss: LossKind = LossKind.BCE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


# ---------------------------------------------------------------- layers


@dataclass
class DenseLayer:
    weights: np.ndarray  # [out, in]
    bias: np.ndarray  # [out]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"inconsistent dense shapes {self.weights.shape} and {self.bias.shape}")

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseLayer":
        bound = 1 / math.sqrt(n_in)
        return cls(rng.uniform(-bound, bound, (n_out, n_in)), rng.uniform(-bound, bound, n_out))


def dense_forward(layer: DenseLayer, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != layer.weights.shape[1]:
        raise ShapeError(f"dense layer expects [B, {layer.weights.shape[1]}], got {x.shape}")
    return x @ layer.weights.T + layer.bias


def relu(x) -> np.ndarray:
    return np.maximum(x, 0.0)


# ---------------------------------------------------------------- losses


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    if z.ndim != 2 or z.shape[1] != 2:
        raise ShapeError(f"logits must have shape [B, 2], got {z.shape}")
    return z


def _check_onehot(targets, batch: int) -> np.ndarray:
    t = np.asarray(targets, dtype=float)
    if t.shape != (batch, 2):
        raise ShapeError(f"one-hot targets must have shape [{batch}, 2], got {t.shape}")
    if not (np.isin(t, (0.0, 1.0)).all() and np.all(t.sum(axis=1) == 1)):
        raise DataError("BCE targets must be one-hot rows")
    return t


def _check_indices(indices, batch: int) -> np.ndarray:
    y = np.asarray(indices)
    if y.shape != (batch,):
        raise ShapeError(f"class indices must have shape [{batch}], got {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise DataError("class indices must be 0 or 1")
    return y.astype(np.int64)


def bce_with_logits_loss(logits, onehot_targets) -> float:
    z = _check_logits(logits)
    t = _check_onehot(onehot_targets, z.shape[0])
    return float(np.mean(np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))))


def cross_entropy_loss(logits, class_indices) -> float:
    z = _check_logits(logits)
    y = _check_indices(class_indices, z.shape[0])
    zmax = z.max(axis=1, keepdims=True)
    lse = (zmax + np.log(np.exp(z - zmax).sum(axis=1, keepdims=True)))[:, 0]
    return float(np.mean(lse - z[np.arange(len(y)), y]))


def loss_and_logit_grad(logits, targets, loss: LossKind) -> tuple[float, np.ndarray]:
    z = _check_logits(logits)
    if LossKind(loss) is LossKind.BCE:
        t = _check_onehot(targets, z.shape[0])
        return bce_with_logits_loss(z, t), (_sigmoid(z) - t) / z.size
    y = _check_indices(targets, z.shape[0])
    shifted = np.exp(z - z.max(axis=1, keepdims=True))
    probs = shifted / shifted.sum(axis=1, keepdims=True)
    probs[np.arange(len(y)), y] -= 1.0
    return cross_entropy_loss(z, y), probs / z.shape[0]


# ---------------------------------------------------------------- models


def init_params(spec: ModelSpec, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    f, q = spec.n_features, spec.width
    layers = {"dense1": DenseLayer.init(f, f, rng), "dense2": DenseLayer.init(f, q, rng)}
    params: dict[str, np.ndarray] = {}
    if spec.kind is ModelKind.FNN:
        layers["dense3"] = DenseLayer.init(q, q, rng)
    else:
        params["vqc.weight"] = vqc.init_weights(spec.circuit, rng)
    layers["out"] = DenseLayer.init(q, 2, rng)
    for name, layer in layers.items():
        params[f"{name}.weight"] = layer.weights
        params[f"{name}.bias"] = layer.bias
    return dict(sorted(params.items()))


def _layer(params, name) -> DenseLayer:
    return DenseLayer(params[f"{name}.weight"], params[f"{name}.bias"])


def _forward(spec: ModelSpec, params, x, with_jacobians: bool):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.n_features:
        raise ShapeError(f"model expects {spec.n_features} features, got input of shape {x.shape}")
    cache = {"x": x}
    cache["a1"] = dense_forward(_layer(params, "dense1"), x)
    cache["h1"] = relu(cache["a1"])
    cache["a2"] = dense_forward(_layer(params, "dense2"), cache["h1"])
    h2 = cache["h2"] = relu(cache["a2"])
    if spec.kind is ModelKind.HFQNN:
        angles = np.pi * np.tanh(h2) if spec.input_scaling == "tanh_pi" else h2
        if with_jacobians:
            q, cache["jx"], cache["jw"] = vqc.jacobians(spec.circuit, params["vqc.weight"], angles)
        else:
            q = vqc.forward(spec.circuit, params["vqc.weight"], angles)
    else:
        cache["a3"] = dense_forward(_layer(params, "dense3"), h2)
        q = relu(cache["a3"])
    cache["q"] = q
    return dense_forward(_layer(params, "out"), q), cache


def model_forward(spec: ModelSpec, params, x) -> np.ndarray:
    """Logits [B, 2]; no output activation."""
    return _forward(spec, params, x, with_jacobians=False)[0]


def loss_and_grad(spec: ModelSpec, params, x, loss: LossKind, targets) -> tuple[float, dict[str, np.ndarray]]:
    logits, c = _forward(spec, params, x, with_jacobians=True)
    value, dz = loss_and_logit_grad(logits, targets, loss)
    g: dict[str, np.ndarray] = {}
    g["out.weight"] = dz.T @ c["q"]
    g["out.bias"] = dz.sum(axis=0)
    dq = dz @ params["out.weight"]
    if spec.kind is ModelKind.HFQNN:
        g["vqc.weight"] = np.einsum("bw,bwlik->lik", dq, c["jw"])
        dh2 = np.einsum("bw,bwi->bi", dq, c["jx"])
        if spec.input_scaling == "tanh_pi":
            dh2 = dh2 * np.pi * (1 - np.tanh(c["h2"]) ** 2)
    else:
        da3 = dq * (c["a3"] > 0)
        g["dense3.weight"] = da3.T @ c["h2"]
        g["dense3.bias"] = da3.sum(axis=0)
        dh2 = da3 @ params["dense3.weight"]
    da2 = dh2 * (c["a2"] > 0)
    g["dense2.weight"] = da2.T @ c["h1"]
    g["dense2.bias"] = da2.sum(axis=0)
    da1 = (da2 @ params["dense2.weight"]) * (c["a1"] > 0)
    g["dense1.weight"] = da1.T @ c["x"]
    g["dense1.bias"] = da1.sum(axis=0)
    return value, dict(sorted(g.items()))


def model_backward(spec: ModelSpec, params, x, loss: LossKind, targets) -> dict[str, np.ndarray]:
    return loss_and_grad(spec, params, x, loss, targets)[1]


def predict(spec: ModelSpec, params, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = [model_forward(spec, params, x[i : i + _PREDICT_CHUNK]) for i in range(0, len(x), _PREDICT_CHUNK)]
    logits = np.concatenate(out) if out else np.zeros((0, 2))
    return logits.argmax(axis=1)


# ---------------------------------------------------------------- Adam


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(state: AdamState, params, grads, lr: float):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``; inputs are not mutated."""
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_params, m, v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {k} has shape {g.shape}, parameter has {p.shape}")
        m[k] = b1 * state.m.get(k, 0.0) + (1 - b1) * g
        v[k] = b2 * state.v.get(k, 0.0) + (1 - b2) * g * g
        m_hat = m[k] / (1 - b1**t)
        v_hat = v[k] / (1 - b2**t)
        new_params[k] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, t, b1, b2, state.eps)


# ---------------------------------------------------------------- training


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    history: list[dict]


def _targets(labels, loss: LossKind):
    return encode_labels(labels, loss)


def evaluate_split(spec: ModelSpec, params, fm: FeatureMatrix, loss: LossKind) -> dict:
    logits = np.concatenate(
        [model_forward(spec, params, fm.values[i : i + _PREDICT_CHUNK]) for i in range(0, len(fm), _PREDICT_CHUNK)]
    )
    value, _ = loss_and_logit_grad(logits, _targets(fm.labels, loss), loss)
    cm, m = metrics.evaluate(logits.argmax(axis=1), fm.labels)
    return {"loss": value, "confusion": asdict(cm), **m.as_dict()}


def train(
    spec: ModelSpec,
    config: TrainConfig,
    train_set: FeatureMatrix,
    val_set: FeatureMatrix,
    params: dict[str, np.ndarray] | None = None,
) -> TrainResult:
    """Mini-batch Adam. Deterministic given ``config.seed``."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise DataError("training and validation sets must be non-empty")
    if train_set.n_features != spec.n_features:
        raise ShapeError(f"model expects {spec.n_features} features, training set has {train_set.n_features}")
    params = init_params(spec, config.seed) if params is None else {k: v.copy() for k, v in params.items()}
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    targets = _targets(train_set.labels, config.loss)
    state = AdamState()
    history = []
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            try:
                with np.errstate(invalid="ignore", over="ignore"):
                    value, grads = loss_and_grad(spec, params, train_set.values[idx], config.loss, targets[idx])
            except DataError as exc:
                # the quantum layer rejects non-finite embedding angles
                raise TrainingError(f"non-finite activations at epoch {epoch}: {exc}") from exc
            if not math.isfinite(value):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            total += value * len(idx)
            params, state = adam_step(state, params, grads, config.learning_rate)
        val = evaluate_split(spec, params, val_set, config.loss)
        if not math.isfinite(val["loss"]):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        record = {"epoch": epoch, "train_loss": total / n, "val_loss": val["loss"]}
        record.update({f"val_{k}": val[k] for k in ("accuracy", "precision", "recall", "f1")})
        history.append(record)
        log.debug("epoch %d train_loss %.5f val_acc %.4f", epoch, record["train_loss"], record["val_accuracy"])
    return TrainResult(params, history)


# ---------------------------------------------------------------- checkpoints


@dataclass
class Checkpoint:
    spec: ModelSpec
    params: dict[str, np.ndarray]
    seed: int
    metadata: dict = field(default_factory=dict)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    """npz with a JSON header; parameters are stored as raw float64 so round trips are bit-exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": "hfqnn-checkpoint",
        "version": CHECKPOINT_VERSION,
        "spec": ckpt.spec.to_dict(),
        "seed": ckpt.seed,
        "metadata": ckpt.metadata,
        "params": sorted(ckpt.params),
        "arrays": sorted(ckpt.arrays),
    }
    payload = {"__header__": np.array(json.dumps(header, sort_keys=True))}
    payload.update({f"param/{k}": v for k, v in ckpt.params.items()})
    payload.update({f"array/{k}": v for k, v in ckpt.arrays.items()})
    with path.open("wb") as fh:
        np.savez(fh, **payload)
    return path


def load_checkpoint(path) -> Checkpoint:
    with np.load(Path(path), allow_pickle=False) as z:
        if "__header__" not in z.files:
            raise IncompatibleCheckpointError(f"{path} is not a model checkpoint")
        header = json.loads(str(z["__header__"]))
        if header.get("format") != "hfqnn-checkpoint" or header.get("version") != CHECKPOINT_VERSION:
            raise IncompatibleCheckpointError(
                f"{path}: checkpoint version {header.get('version')!r} is incompatible with {CHECKPOINT_VERSION}"
            )
        params = {k: z[f"param/{k}"] for k in header["params"]}
        arrays = {k: z[f"array/{k}"] for k in header["arrays"]}
    return Checkpoint(ModelSpec.from_dict(header["spec"]), params, header["seed"], header["metadata"], arrays)
