"""Small dense feed-forward networks with hand-written backpropagation.

Parameters of a network live in one contiguous float64 buffer. Per-layer
weight matrices and bias vectors are views into that buffer, so flattening
is a copy and aggregation can work on plain vectors.

Layout, per layer in order: weight matrix (output_width x input_width,
row-major) followed by the bias vector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

ACTIVATIONS = ("relu", "elu", "linear")
_ACTIVATION_CODES = {"relu": 0, "elu": 1, "linear": 2}
_CHECKPOINT_MAGIC = b"FROM1"


class ConfigurationError(ValueError):
    """Raised for inconsistent network or experiment configuration."""


@dataclass(frozen=True)
class LayerSpec:
    input_width: int
    output_width: int
    activation: str = "linear"

    def __post_init__(self):
        if self.input_width < 1 or self.output_width < 1:
            raise ConfigurationError(f"layer widths must be >= 1, got {self}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        return self.output_width * self.input_width + self.output_width


def mlp_specs(widths: Sequence[int], hidden: str, output: str = "linear") -> list[LayerSpec]:
    """Chain of dense layers through ``widths``; last layer uses ``output``."""
    specs = []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        act = output if i == len(widths) - 2 else hidden
        specs.append(LayerSpec(int(a), int(b), act))
    return specs


def check_chain(specs: Sequence[LayerSpec]) -> tuple[LayerSpec, ...]:
    specs = tuple(specs)
    if not specs:
        raise ConfigurationError("a network needs at least one layer")
    for i, (a, b) in enumerate(zip(specs[:-1], specs[1:])):
        if a.output_width != b.input_width:
            raise ConfigurationError(
                f"layer {i} outputs {a.output_width} but layer {i + 1} expects {b.input_width}"
            )
    return specs


def n_params(specs: Sequence[LayerSpec]) -> int:
    return sum(s.n_params for s in specs)


def _views(specs, buf):
    weights, biases = [], []
    pos = 0
    for s in specs:
        nw = s.output_width * s.input_width
        weights.append(buf[pos:pos + nw].reshape(s.output_width, s.input_width))
        pos += nw
        biases.append(buf[pos:pos + s.output_width])
        pos += s.output_width
    return weights, biases


@dataclass(eq=False)
class Network:
    """Feed-forward network; ``params`` is the flat parameter vector."""

    layers: tuple[LayerSpec, ...]
    params: np.ndarray
    weights: list[np.ndarray] = field(init=False, repr=False)
    biases: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self.layers = check_chain(self.layers)
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.shape != (n_params(self.layers),):
            raise ConfigurationError(
                f"expected {n_params(self.layers)} parameters, got shape {self.params.shape}"
            )
        self.weights, self.biases = _views(self.layers, self.params)

    @property
    def input_width(self) -> int:
        return self.layers[0].input_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].output_width

    def copy(self) -> "Network":
        return Network(self.layers, self.params.copy())

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.layers == other.layers and np.array_equal(self.params, other.params)


def build_network(specs: Sequence[LayerSpec], seed: int) -> Network:
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    specs = check_chain(specs)
    rng = np.random.default_rng(seed)
    params = np.zeros(n_params(specs))
    weights, _ = _views(specs, params)
    for s, w in zip(specs, weights):
        limit = np.sqrt(6.0 / (s.input_width + s.output_width))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return Network(specs, params)


def flatten(net: Network) -> np.ndarray:
    return net.params.copy()


def unflatten(values, specs: Sequence[LayerSpec]) -> Network:
    values = np.asarray(values, dtype=np.float64)
    specs = check_chain(specs)
    if values.shape != (n_params(specs),):
        raise ConfigurationError(
            f"parameter vector of length {values.size} does not match layout of {n_params(specs)}"
        )
    return Network(specs, values.copy())


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "elu":
        return np.where(z >= 0.0, z, np.expm1(np.minimum(z, 0.0)))
    return z


def _activation_grad(z, a, kind):
    # relu'(0) is taken as 0
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "elu":
        return np.where(z >= 0.0, 1.0, a + 1.0)
    return None


def _as_batch(x, width, name):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != width:
        raise ValueError(f"{name} has shape {x.shape}, expected trailing dimension {width}")
    return x2, single


def forward(net: Network, x) -> np.ndarray:
    """Evaluate the network on one input vector or a batch of row vectors."""
    a, single = _as_batch(x, net.input_width, "input")
    for s, w, b in zip(net.layers, net.weights, net.biases):
        a = _activate(a @ w.T + b, s.activation)
    return a[0] if single else a


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty input")
    d = pred - target
    return float(np.mean(d * d))


def loss_and_grad(net: Network, inputs, targets) -> tuple[float, np.ndarray]:
    """Mean-squared error over the batch and its gradient in flat layout.

    The per-example loss is the mean over output components, and the batch
    loss is the mean of those, which is the mean over all entries.
    """
    x, _ = _as_batch(inputs, net.input_width, "inputs")
    y, _ = _as_batch(targets, net.output_width, "targets")
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"{x.shape[0]} inputs but {y.shape[0]} targets")

    pre, post = [], [x]
    a = x
    for s, w, b in zip(net.layers, net.weights, net.biases):
        z = a @ w.T + b
        a = _activate(z, s.activation)
        pre.append(z)
        post.append(a)

    diff = a - y
    loss = float(np.mean(diff * diff))
    delta = (2.0 / diff.size) * diff

    grad = np.empty_like(net.params)
    gw, gb = _views(net.layers, grad)
    for i in range(len(net.layers) - 1, -1, -1):
        dz = _activation_grad(pre[i], post[i + 1], net.layers[i].activation)
        if dz is not None:
            delta = delta * dz
        gw[i][...] = delta.T @ post[i]
        gb[i][...] = delta.sum(axis=0)
        if i:
            delta = delta @ net.weights[i]
    return loss, grad


def backward(net: Network, inputs, targets) -> np.ndarray:
    """Gradient of the mean batch loss, in the same layout as ``flatten``."""
    return loss_and_grad(net, inputs, targets)[1]


def sgd_step(net: Network, grad, lr: float) -> Network:
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != net.params.shape:
        raise ConfigurationError(f"gradient shape {grad.shape} does not match {net.params.shape}")
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    return Network(net.layers, net.params - lr * grad)


def dataset_loss(net: Network, inputs, targets) -> float:
    return mse_loss(forward(net, inputs), np.asarray(targets, dtype=np.float64))


# checkpoint files ---------------------------------------------------------

def write_network(fh: BinaryIO, net: Network) -> None:
    fh.write(_CHECKPOINT_MAGIC)
    fh.write(struct.pack("<I", len(net.layers)))
    for s in net.layers:
        fh.write(struct.pack("<III", s.input_width, s.output_width, _ACTIVATION_CODES[s.activation]))
    fh.write(net.params.astype("<f8").tobytes())


def read_network(fh: BinaryIO) -> Network:
    magic = fh.read(5)
    if magic != _CHECKPOINT_MAGIC:
        raise ValueError(f"not a network checkpoint (magic {magic!r})")
    (count,) = struct.unpack("<I", _read_exact(fh, 4))
    codes = {v: k for k, v in _ACTIVATION_CODES.items()}
    specs = []
    for _ in range(count):
        i, o, c = struct.unpack("<III", _read_exact(fh, 12))
        if c not in codes:
            raise ValueError(f"unknown activation code {c}")
        specs.append(LayerSpec(i, o, codes[c]))
    size = n_params(specs)
    params = np.frombuffer(_read_exact(fh, 8 * size), dtype="<f8").astype(np.float64)
    return Network(tuple(specs), params)


def _read_exact(fh, n):
    data = fh.read(n)
    if len(data) != n:
        raise ValueError("truncated checkpoint")
    return data


def save_checkpoint(path, net: Network) -> None:
    with open(path, "wb") as fh:
        write_network(fh, net)


def load_checkpoint(path) -> Network:
    with open(Path(path), "rb") as fh:
        net = read_network(fh)
        if fh.read(1):
            raise ValueError("trailing bytes after checkpoint")
    return net
