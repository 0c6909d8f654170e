"""Dense Q-network built on plain numpy: forward pass, masked-MSE backprop,
SGD/Adam updates, and a JSON checkpoint format (MLPv1).

All math is float64. Weights are (out_dim, in_dim) so a forward step is
x @ W.T + b. The loss divides by the number of mask-true entries, so batches
where each row supervises a single output train at full strength.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

RELU = "relu"
LINEAR = "linear"
SGD = "sgd"
ADAM = "adam"

DEFAULT_DIMS = (7, 64, 64, 3)

MODEL_FORMAT = "MLPv1"


class NonFiniteInput(ValueError):
    """forward() received NaN or infinity."""


class EmptyMask(ValueError):
    """Loss requested over a mask with no True entries."""


class NonFiniteGradient(FloatingPointError):
    """Backprop produced NaN or infinity; the update was not applied."""


class ArchitectureMismatch(ValueError):
    """Layer dimensions do not chain, or two nets disagree in shape."""


class BadFormat(ValueError):
    """Model document is not valid MLPv1 JSON."""


class BadVersion(ValueError):
    """Model document declares an unsupported format version."""


class ShapeMismatch(ValueError):
    """Model document arrays disagree with their declared dimensions."""


class DenseLayer:
    """One affine map plus activation. weights has shape (out_dim, in_dim)."""

    __slots__ = ("weights", "biases", "activation")

    def __init__(self, weights, biases, activation: str):
        weights = np.array(weights, dtype=np.float64)
        biases = np.array(biases, dtype=np.float64)
        if weights.ndim != 2:
            raise ShapeMismatch(f"weights must be 2d, got shape {weights.shape}")
        if biases.shape != (weights.shape[0],):
            raise ShapeMismatch(
                f"biases shape {biases.shape} does not match out_dim {weights.shape[0]}")
        if activation not in (RELU, LINEAR):
            raise ValueError(f"unknown activation {activation!r}")
        self.weights = weights
        self.biases = biases
        self.activation = activation

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def param_count(self) -> int:
        return self.weights.size + self.biases.size


class Mlp:
    """Feed-forward stack of DenseLayers with chained dimensions."""

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ArchitectureMismatch("need at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ArchitectureMismatch(
                    f"layer out_dim {a.out_dim} does not chain into in_dim {b.in_dim}")
        self.layers = layers

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def param_counts(self) -> list[int]:
        return [layer.param_count for layer in self.layers]

    @property
    def num_params(self) -> int:
        return sum(self.param_counts())

    def forward(self, x) -> np.ndarray:
        """Evaluate on one input (in_dim,) or a batch (batch, in_dim)."""
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput("forward input contains NaN or infinity")
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.shape[-1] != self.in_dim:
            raise ShapeMismatch(f"input dim {a.shape[-1]}, net expects {self.in_dim}")
        for layer in self.layers:
            z = a @ layer.weights.T + layer.biases
            a = np.maximum(z, 0.0) if layer.activation == RELU else z
        return a[0] if single else a


def init_mlp(seed, dims=DEFAULT_DIMS) -> Mlp:
    """Fresh net with uniform(+-sqrt(6/in_dim)) weights and zero biases;
    hidden layers RELU, output LINEAR. Same seed, same net."""
    rng = np.random.default_rng(seed)
    layers = []
    for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        bound = math.sqrt(6.0 / din)
        weights = rng.uniform(-bound, bound, size=(dout, din))
        activation = LINEAR if i == len(dims) - 2 else RELU
        layers.append(DenseLayer(weights, np.zeros(dout), activation))
    return Mlp(layers)


def forward(net: Mlp, x) -> np.ndarray:
    return net.forward(x)


def clone_mlp(net: Mlp) -> Mlp:
    """Independent deep copy (used to spawn a target net)."""
    return Mlp([DenseLayer(l.weights.copy(), l.biases.copy(), l.activation)
                for l in net.layers])


def clone_weights(src: Mlp, dst: Mlp) -> None:
    """Copy parameters bitwise from src into dst. Shapes must agree exactly;
    any optimizer state attached to dst is untouched."""
    if len(src.layers) != len(dst.layers):
        raise ArchitectureMismatch(
            f"layer count {len(src.layers)} != {len(dst.layers)}")
    for s, d in zip(src.layers, dst.layers):
        if s.weights.shape != d.weights.shape or s.activation != d.activation:
            raise ArchitectureMismatch(
                f"layer shape {s.weights.shape}/{s.activation} != "
                f"{d.weights.shape}/{d.activation}")
    for s, d in zip(src.layers, dst.layers):
        d.weights[...] = s.weights
        d.biases[...] = s.biases


@dataclass(frozen=True)
class TrainTarget:
    """One supervised batch. mask marks which target entries carry loss."""

    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray


def mse_loss(pred, target: TrainTarget) -> float:
    """Mean squared error over mask-true entries only (divisor = their count)."""
    pred = np.asarray(pred, dtype=np.float64)
    mask = np.asarray(target.mask, dtype=bool)
    m = int(mask.sum())
    if m == 0:
        raise EmptyMask("mask has no True entries")
    diff = np.where(mask, pred - target.targets, 0.0)
    return float((diff * diff).sum() / m)


def _forward_trace(net: Mlp, x: np.ndarray):
    pre = []
    acts = [x]
    a = x
    for layer in net.layers:
        z = a @ layer.weights.T + layer.biases
        pre.append(z)
        a = np.maximum(z, 0.0) if layer.activation == RELU else z
        acts.append(a)
    return pre, acts


def _gradients(net: Mlp, batch: TrainTarget):
    """Loss and per-layer (dW, db) for the masked MSE. Masked-out entries
    contribute exactly zero to both."""
    x = np.asarray(batch.inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"inputs must be a non-empty batch, got shape {x.shape}")
    targets = np.asarray(batch.targets, dtype=np.float64)
    mask = np.asarray(batch.mask, dtype=bool)
    m = int(mask.sum())
    if m == 0:
        raise EmptyMask("mask has no True entries")

    pre, acts = _forward_trace(net, x)
    diff = np.where(mask, acts[-1] - targets, 0.0)
    loss = float((diff * diff).sum() / m)

    grads: list[tuple[np.ndarray, np.ndarray]] = []
    d = (2.0 / m) * diff
    for k in reversed(range(len(net.layers))):
        layer = net.layers[k]
        dz = d * (pre[k] > 0.0) if layer.activation == RELU else d
        grads.append((dz.T @ acts[k], dz.sum(axis=0)))
        if k:
            d = dz @ layer.weights
    grads.reverse()
    return loss, grads


class OptimizerState:
    """Update rule plus its accumulators. Adam moment arrays are created on
    first use and exist only for kind == ADAM."""

    def __init__(self, kind: str = ADAM, learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        if kind not in (SGD, ADAM):
            raise ValueError(f"unknown optimizer kind {kind!r}")
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {learning_rate}")
        self.kind = kind
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self._m: list[tuple[np.ndarray, np.ndarray]] | None = None
        self._v: list[tuple[np.ndarray, np.ndarray]] | None = None

    def _moments(self, net: Mlp):
        if self._m is None:
            self._m = [(np.zeros_like(l.weights), np.zeros_like(l.biases))
                       for l in net.layers]
            self._v = [(np.zeros_like(l.weights), np.zeros_like(l.biases))
                       for l in net.layers]
        return self._m, self._v


def apply_update(net: Mlp, opt: OptimizerState, grads) -> None:
    """One in-place parameter update from per-layer (dW, db) gradients."""
    opt.step_count += 1
    if opt.kind == SGD:
        for layer, (gw, gb) in zip(net.layers, grads):
            layer.weights -= opt.learning_rate * gw
            layer.biases -= opt.learning_rate * gb
        return
    m, v = opt._moments(net)
    c1 = 1.0 - opt.beta1 ** opt.step_count
    c2 = 1.0 - opt.beta2 ** opt.step_count
    for layer, (gw, gb), (mw, mb), (vw, vb) in zip(net.layers, grads, m, v):
        for p, g, mom, vel in ((layer.weights, gw, mw, vw),
                               (layer.biases, gb, mb, vb)):
            mom *= opt.beta1
            mom += (1.0 - opt.beta1) * g
            vel *= opt.beta2
            vel += (1.0 - opt.beta2) * (g * g)
            p -= opt.learning_rate * (mom / c1) / (np.sqrt(vel / c2) + opt.epsilon)


def train_on_batch(net: Mlp, opt: OptimizerState, batch: TrainTarget) -> float:
    """One gradient step. Returns the pre-update loss. Raises and applies
    nothing when any gradient entry is non-finite."""
    loss, grads = _gradients(net, batch)
    for gw, gb in grads:
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NonFiniteGradient("gradient contains NaN or infinity")
    apply_update(net, opt, grads)
    return loss


def save_model(net: Mlp) -> bytes:
    """Serialize to MLPv1 JSON (UTF-8 bytes). Weights flatten row-major."""
    doc = {
        "format": MODEL_FORMAT,
        "layers": [
            {
                "in": layer.in_dim,
                "out": layer.out_dim,
                "act": layer.activation,
                "w": layer.weights.reshape(-1).tolist(),
                "b": layer.biases.tolist(),
            }
            for layer in net.layers
        ],
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def load_model(data) -> Mlp:
    """Parse MLPv1 JSON back into a net. Round-trips save_model bitwise."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="strict")
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise BadFormat(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "format" not in doc:
        raise BadFormat("missing 'format' key")
    if doc["format"] != MODEL_FORMAT:
        raise BadVersion(f"unsupported format {doc['format']!r}")
    if not isinstance(doc.get("layers"), list) or not doc["layers"]:
        raise BadFormat("'layers' must be a non-empty list")

    layers = []
    for i, entry in enumerate(doc["layers"]):
        if not isinstance(entry, dict):
            raise BadFormat(f"layer {i} is not an object")
        try:
            din, dout, act = entry["in"], entry["out"], entry["act"]
            w, b = entry["w"], entry["b"]
        except KeyError as exc:
            raise BadFormat(f"layer {i} missing key {exc}") from None
        if act not in (RELU, LINEAR):
            raise BadFormat(f"layer {i} has unknown activation {act!r}")
        if not isinstance(din, int) or not isinstance(dout, int) or din < 1 or dout < 1:
            raise BadFormat(f"layer {i} dims must be positive integers")
        if len(w) != din * dout:
            raise ShapeMismatch(
                f"layer {i} has {len(w)} weights, expected {din * dout}")
        if len(b) != dout:
            raise ShapeMismatch(f"layer {i} has {len(b)} biases, expected {dout}")
        weights = np.asarray(w, dtype=np.float64).reshape(dout, din)
        biases = np.asarray(b, dtype=np.float64)
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise BadFormat(f"layer {i} contains non-finite parameters")
        layers.append(DenseLayer(weights, biases, act))
    try:
        return Mlp(layers)
    except ArchitectureMismatch as exc:
        raise ShapeMismatch(str(exc)) from None
