"""From-scratch multilayer perceptron: dense + dropout layers, forward
pass, mean squared / absolute error, hand-derived backpropagation, and
plain SGD updates.

Batches are (batch, width) float64 arrays. A dense layer holds W with
shape (out_width, in_width) and bias b with shape (out_width,), computing
activation(x @ W.T + b). Dropout is inverted: surviving units are scaled
by 1/(1 - rate) at train time so inference applies no mask at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorruptPayload,
    EmptySpec,
    IncompatibleWidths,
    NonFiniteInput,
    NonPositiveLearningRate,
    ShapeMismatch,
    StaleCache,
    VersionMismatch,
)
from .rng import STREAM_INIT, VectorXoshiro, Xoshiro256StarStar

MODEL_FORMAT = "studentperf-mlp"
MODEL_VERSION = 1

ACTIVATIONS = ("relu", "linear")

# Hidden dense widths of the default classifier architecture.
DEFAULT_HIDDEN_WIDTHS = (80, 120, 20, 10)
DEFAULT_DROPOUT_RATE = 0.2


@dataclass(frozen=True)
class LayerSpec:
    """Either dense(in_width, out_width, activation) or dropout(rate)."""

    kind: str
    in_width: int = 0
    out_width: int = 0
    activation: str = "relu"
    rate: float = 0.0

    @classmethod
    def dense(cls, in_width: int, out_width: int,
              activation: str = "relu") -> "LayerSpec":
        if in_width < 1 or out_width < 1:
            raise IncompatibleWidths(
                f"dense widths must be >= 1, got {in_width}->{out_width}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        return cls("dense", in_width=in_width, out_width=out_width,
                   activation=activation)

    @classmethod
    def dropout(cls, rate: float) -> "LayerSpec":
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate {rate} outside [0, 1)")
        return cls("dropout", rate=rate)

    def param_count(self) -> int:
        if self.kind == "dense":
            return (self.in_width + 1) * self.out_width
        return 0


def default_architecture(in_width: int, n_classes: int = 3,
                         dropout_rate: float = DEFAULT_DROPOUT_RATE,
                         hidden=DEFAULT_HIDDEN_WIDTHS) -> list[LayerSpec]:
    """Dense/dropout stack: relu hidden layers with dropout after each,
    linear output."""
    specs: list[LayerSpec] = []
    prev = in_width
    for width in hidden:
        specs.append(LayerSpec.dense(prev, width, "relu"))
        specs.append(LayerSpec.dropout(dropout_rate))
        prev = width
    specs.append(LayerSpec.dense(prev, n_classes, "linear"))
    return specs


@dataclass(frozen=True)
class Network:
    """Ordered layers plus per-dense-layer parameters.

    params[i] is a (W, b) pair when layers[i] is dense, else None.
    Treat instances as immutable; updates produce new networks.
    """

    layers: tuple[LayerSpec, ...]
    params: tuple
    seed: int

    @property
    def in_width(self) -> int:
        return next(l.in_width for l in self.layers if l.kind == "dense")

    @property
    def out_width(self) -> int:
        return next(l.out_width for l in reversed(self.layers)
                    if l.kind == "dense")

    def param_count(self) -> int:
        return sum(l.param_count() for l in self.layers)

    def layer_param_counts(self) -> list[int]:
        return [l.param_count() for l in self.layers]


def _validate_specs(specs: list[LayerSpec]) -> None:
    if not specs:
        raise EmptySpec("network needs at least one layer")
    dense = [l for l in specs if l.kind == "dense"]
    if not dense:
        raise EmptySpec("network needs at least one dense layer")
    for a, b in zip(dense, dense[1:]):
        if a.out_width != b.in_width:
            raise IncompatibleWidths(
                f"dense {a.in_width}->{a.out_width} feeds dense "
                f"{b.in_width}->{b.out_width}")


def init_network(specs: list[LayerSpec], seed: int) -> Network:
    """Glorot-uniform weights, zero biases.

    Each dense layer's W is filled row-major from U(-g, g) with
    g = sqrt(6 / (in + out)), drawn from xoshiro256** stream 0 of `seed`.
    Identical seeds therefore reproduce identical weights on any platform.
    """
    _validate_specs(specs)
    rng = Xoshiro256StarStar(seed, stream=STREAM_INIT)
    params = []
    for spec in specs:
        if spec.kind != "dense":
            params.append(None)
            continue
        g = np.sqrt(6.0 / (spec.in_width + spec.out_width))
        w = np.empty((spec.out_width, spec.in_width))
        flat = w.reshape(-1)
        for i in range(flat.size):
            flat[i] = rng.uniform(-g, g)
        params.append((w, np.zeros(spec.out_width)))
    return Network(tuple(specs), tuple(params), seed)


@dataclass
class ForwardCache:
    """Per-layer intermediates of one train-mode forward pass."""

    batch: np.ndarray
    inputs: list            # input to each layer
    pre_activations: list   # dense: x @ W.T + b, else None
    masks: list             # dropout: scaled mask array, else None
    output: np.ndarray
    n_layers: int


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteInput(f"{what} contains NaN or Inf")


def forward(net: Network, batch: np.ndarray, mode: str = "infer",
            rng: VectorXoshiro | None = None,
            masks: list | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Run the network over a batch.

    mode "train" applies dropout; masks come from `rng` unless an explicit
    `masks` list (as produced in a previous cache) is given, which replays
    that exact pass deterministically. mode "infer" skips dropout.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    x = np.asarray(batch, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    _check_finite(x, "input batch")
    if x.shape[1] != net.in_width:
        raise ShapeMismatch(
            f"batch width {x.shape[1]} != network input {net.in_width}")
    if mode == "train" and rng is None and masks is None:
        raise ValueError("train mode needs an rng or replay masks")
    inputs, pre_acts, used_masks = [], [], []
    for idx, layer in enumerate(net.layers):
        inputs.append(x)
        if layer.kind == "dense":
            w, b = net.params[idx]
            z = x @ w.T + b
            pre_acts.append(z)
            used_masks.append(None)
            x = np.maximum(z, 0.0) if layer.activation == "relu" else z
        else:
            pre_acts.append(None)
            if mode == "infer" or layer.rate == 0.0:
                used_masks.append(None)
            else:
                if masks is not None:
                    mask = masks[idx]
                    if mask is None or mask.shape != x.shape:
                        raise StaleCache(
                            f"replay mask missing or misshapen at layer {idx}")
                else:
                    keep = 1.0 - layer.rate
                    mask = rng.keep_mask(x.shape, keep) / keep
                used_masks.append(mask)
                x = x * mask
    cache = ForwardCache(batch=inputs[0], inputs=inputs,
                         pre_activations=pre_acts, masks=used_masks,
                         output=x, n_layers=len(net.layers))
    return x, cache


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of squared differences over every batch x output entry."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ShapeMismatch(f"{p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def mae(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of absolute differences over every batch x output entry."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ShapeMismatch(f"{p.shape} vs {t.shape}")
    return float(np.mean(np.abs(p - t)))


@dataclass(frozen=True)
class Gradients:
    """Per-dense-layer (dW, db), aligned with Network.layers indices."""

    entries: tuple  # (dW, db) for dense layers, None otherwise


def backward(net: Network, cache: ForwardCache,
             target: np.ndarray) -> Gradients:
    """Exact gradients of the mean-squared-error objective.

    Replays the cached pass in reverse; dropout masks from the cache are
    reused so the differentiated function is precisely the one the forward
    pass computed.
    """
    if cache.n_layers != len(net.layers):
        raise StaleCache("cache layer count does not match network")
    t = np.asarray(target, dtype=float)
    if t.shape != cache.output.shape:
        raise ShapeMismatch(f"target {t.shape} vs output {cache.output.shape}")
    batch, width = cache.output.shape
    # d(mean((y - t)^2)) / dy
    delta = 2.0 * (cache.output - t) / (batch * width)
    entries: list = [None] * len(net.layers)
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        if layer.kind == "dropout":
            mask = cache.masks[idx]
            if mask is not None:
                delta = delta * mask
            continue
        w, _ = net.params[idx]
        z = cache.pre_activations[idx]
        if layer.activation == "relu":
            delta = delta * (z > 0.0)
        dw = delta.T @ cache.inputs[idx]
        db = delta.sum(axis=0)
        _check_finite(dw, "weight gradient")
        entries[idx] = (dw, db)
        delta = delta @ w
    return Gradients(tuple(entries))


def sgd_step(net: Network, grads: Gradients, learning_rate: float) -> Network:
    """W <- W - lr * dW, b <- b - lr * db; returns a new network."""
    if learning_rate <= 0.0:
        raise NonPositiveLearningRate(f"learning_rate={learning_rate}")
    if len(grads.entries) != len(net.layers):
        raise ShapeMismatch("gradient entries do not align with layers")
    new_params = []
    for layer, param, grad in zip(net.layers, net.params, grads.entries):
        if layer.kind != "dense":
            new_params.append(None)
            continue
        w, b = param
        dw, db = grad
        if dw.shape != w.shape or db.shape != b.shape:
            raise ShapeMismatch(
                f"gradient shape {dw.shape} vs weight {w.shape}")
        new_params.append((w - learning_rate * dw, b - learning_rate * db))
    return Network(net.layers, tuple(new_params), net.seed)


def predict_class(net: Network, features: np.ndarray) -> int:
    """Argmax of the infer-mode output; ties go to the lowest index."""
    out, _ = forward(net, np.asarray(features, dtype=float), mode="infer")
    return int(np.argmax(out[0]))


def predict_classes(net: Network, batch: np.ndarray) -> np.ndarray:
    out, _ = forward(net, batch, mode="infer")
    return np.argmax(out, axis=1)


# --- serialization ---------------------------------------------------------

def save_network(net: Network) -> str:
    """Versioned JSON document with full round-trip float precision."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "seed": net.seed,
        "layers": [
            ({"kind": "dense", "in_width": l.in_width,
              "out_width": l.out_width, "activation": l.activation}
             if l.kind == "dense" else
             {"kind": "dropout", "rate": l.rate})
            for l in net.layers
        ],
        "params": [
            ({"weights": p[0].tolist(), "bias": p[1].tolist()}
             if p is not None else None)
            for p in net.params
        ],
    }
    return json.dumps(doc, indent=1)


def write_network(net: Network, target) -> None:
    payload = save_network(net)
    if hasattr(target, "write"):
        target.write(payload)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(payload)
            fh.write("\n")


def load_network(source) -> Network:
    """Inverse of save_network; predictions round-trip bit-identically.

    Accepts a file-like object, a serialized str/bytes payload, or a
    filesystem path.
    """
    if hasattr(source, "read"):
        payload = source.read()
    elif isinstance(source, (str, bytes)):
        text = source.decode("utf-8", errors="replace") \
            if isinstance(source, bytes) else source
        if "{" in text:
            payload = source
        else:
            with open(source, "r", encoding="utf-8") as fh:
                payload = fh.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            payload = fh.read()
    if isinstance(payload, bytes):
        try:
            payload = payload.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptPayload(f"cannot decode model bytes: {exc}") from None
    try:
        doc = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptPayload(f"cannot decode model JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CorruptPayload("model document is not an object")
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise VersionMismatch(
            f"unsupported model format/version: "
            f"{doc.get('format')!r} v{doc.get('version')!r}")
    try:
        specs = []
        for l in doc["layers"]:
            if l["kind"] == "dense":
                specs.append(LayerSpec.dense(l["in_width"], l["out_width"],
                                             l["activation"]))
            elif l["kind"] == "dropout":
                specs.append(LayerSpec.dropout(l["rate"]))
            else:
                raise CorruptPayload(f"unknown layer kind {l['kind']!r}")
        raw_params = doc["params"]
        seed = int(doc["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptPayload(f"model document malformed: {exc}") from None
    _validate_specs(specs)
    if len(raw_params) != len(specs):
        raise ShapeMismatch("params do not align with layers")
    params = []
    for spec, rp in zip(specs, raw_params):
        if spec.kind != "dense":
            params.append(None)
            continue
        if rp is None:
            raise ShapeMismatch("dense layer without parameters")
        w = np.asarray(rp["weights"], dtype=float)
        b = np.asarray(rp["bias"], dtype=float)
        if w.shape != (spec.out_width, spec.in_width) or \
                b.shape != (spec.out_width,):
            raise ShapeMismatch(
                f"parameter shape {w.shape}/{b.shape} does not match "
                f"dense {spec.in_width}->{spec.out_width}")
        params.append((w, b))
    return Network(tuple(specs), tuple(params), seed)
