"""
Fully-connected networks in plain numpy with an explicit forward cache and a
hand-written reverse pass.

Everything is float64. Inputs may be a single vector of shape (in,) or a
batch of shape (n, in); gradients of a batch are summed over its rows.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..utils.common import (
    CheckpointError,
    CheckpointShapeError,
    CheckpointVersionError,
    ConfigError,
    NumericError,
    UsageError,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
ACTIVATIONS = ("tanh", "relu", "sigmoid", "softplus", "identity")


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return expit(z)
    if name == "softplus":
        return np.logaddexp(0.0, z)
    if name == "identity":
        return z
    raise ConfigError(f"unknown activation '{name}'")


def activation_derivative(name: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d activation / dz, given the pre-activation z and its output y."""
    if name == "tanh":
        return 1.0 - y * y
    if name == "relu":
        return np.where(z > 0.0, 1.0, 0.0)
    if name == "sigmoid":
        return y * (1.0 - y)
    if name == "softplus":
        return expit(z)
    if name == "identity":
        return np.ones_like(z)
    raise ConfigError(f"unknown activation '{name}'")


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "tanh"

    def validate(self) -> "LayerSpec":
        if self.input_dim <= 0 or self.output_dim <= 0:
            raise ConfigError(f"layer dims must be positive, got {self.input_dim}x{self.output_dim}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation '{self.activation}', expected one of {ACTIVATIONS}")
        return self


@dataclass(eq=False)
class Layer:
    spec: LayerSpec
    weights: np.ndarray  # (output_dim, input_dim)
    bias: np.ndarray  # (output_dim,)


@dataclass(eq=False)
class NetParams:
    layers: List[Layer]
    version: int = 0

    @property
    def specs(self) -> List[LayerSpec]:
        return [layer.spec for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].spec.input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].spec.output_dim

    def copy(self) -> "NetParams":
        return NetParams(
            layers=[Layer(layer.spec, layer.weights.copy(), layer.bias.copy()) for layer in self.layers],
            version=self.version,
        )

    def equals(self, other: "NetParams") -> bool:
        if self.specs != other.specs:
            return False
        return all(np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
                   for a, b in zip(self.layers, other.layers))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias)) for layer in self.layers)


@dataclass(eq=False)
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def zeros_like(cls, params: NetParams) -> "Gradients":
        return cls([np.zeros_like(layer.weights) for layer in params.layers],
                   [np.zeros_like(layer.bias) for layer in params.layers])

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.weights + self.biases)

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for pair in zip(self.weights, self.biases) for g in pair])


@dataclass(eq=False)
class ForwardCache:
    params_id: int
    version: int
    batched: bool
    inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    outputs: List[np.ndarray] = field(default_factory=list)


def init(specs: Sequence[LayerSpec], rng: np.random.Generator) -> NetParams:
    """
    Glorot-uniform weights, zero biases.

    Args:
        specs: layer specs, each output_dim matching the next input_dim
        rng: seeded generator

    Returns:
        Fresh NetParams
    """
    if not specs:
        raise ConfigError("a network needs at least one layer")
    for spec in specs:
        spec.validate()
    for prev, nxt in zip(specs[:-1], specs[1:]):
        if prev.output_dim != nxt.input_dim:
            raise ConfigError(f"incompatible layers: {prev.output_dim} outputs feed {nxt.input_dim} inputs")
    layers = []
    for spec in specs:
        limit = np.sqrt(6.0 / (spec.input_dim + spec.output_dim))
        weights = rng.uniform(-limit, limit, size=(spec.output_dim, spec.input_dim))
        layers.append(Layer(spec, weights, np.zeros(spec.output_dim)))
    return NetParams(layers=layers)


def forward(params: NetParams, x: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    h = x if batched else x.reshape(1, -1)
    if h.ndim != 2 or h.shape[1] != params.input_dim:
        raise UsageError(f"expected input of width {params.input_dim}, got shape {x.shape}")
    cache = ForwardCache(params_id=id(params), version=params.version, batched=batched)
    for layer in params.layers:
        z = h @ layer.weights.T + layer.bias
        out = activate(layer.spec.activation, z)
        cache.inputs.append(h)
        cache.pre_activations.append(z)
        cache.outputs.append(out)
        h = out
    y = h if batched else h[0]
    return y, cache


def backward(params: NetParams, cache: ForwardCache, dL_dy: np.ndarray) -> Tuple[Gradients, np.ndarray]:
    """
    Reverse pass through the cached forward.

    Args:
        params: the parameters the cache was produced with
        cache: cache returned by forward
        dL_dy: cotangent of the output, same shape as the forward output

    Returns:
        (gradients summed over the batch, cotangent of the input)
    """
    if cache.params_id != id(params) or cache.version != params.version:
        raise UsageError("stale forward cache: parameters changed since the forward pass")
    delta = np.asarray(dL_dy, dtype=np.float64)
    if not cache.batched:
        delta = delta.reshape(1, -1)
    if delta.shape != cache.outputs[-1].shape:
        raise UsageError(f"cotangent shape {delta.shape} does not match output {cache.outputs[-1].shape}")

    weight_grads: List[np.ndarray] = [None] * len(params.layers)
    bias_grads: List[np.ndarray] = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        dz = delta * activation_derivative(layer.spec.activation, cache.pre_activations[i], cache.outputs[i])
        weight_grads[i] = dz.T @ cache.inputs[i]
        bias_grads[i] = dz.sum(axis=0)
        delta = dz @ layer.weights

    dL_dx = delta if cache.batched else delta[0]
    return Gradients(weight_grads, bias_grads), dL_dx


def sgd_step(params: NetParams, grads: Gradients, lr: float) -> NetParams:
    """In-place w <- w - lr * g. Rejects non-finite gradients without touching params."""
    if len(grads.weights) != len(params.layers):
        raise UsageError("gradient/parameter layer count mismatch")
    for layer, gw, gb in zip(params.layers, grads.weights, grads.biases):
        if gw.shape != layer.weights.shape or gb.shape != layer.bias.shape:
            raise UsageError("gradient/parameter shape mismatch")
    if not grads.all_finite():
        raise NumericError("non-finite gradient rejected")
    for layer, gw, gb in zip(params.layers, grads.weights, grads.biases):
        layer.weights -= lr * gw
        layer.bias -= lr * gb
    params.version += 1
    return params


def params_to_layers(params: NetParams) -> List[dict]:
    return [
        {
            "in": layer.spec.input_dim,
            "out": layer.spec.output_dim,
            "activation": layer.spec.activation,
            "weights": layer.weights.ravel().tolist(),
            "bias": layer.bias.tolist(),
        }
        for layer in params.layers
    ]


def params_from_layers(entries: Sequence[dict]) -> NetParams:
    if not isinstance(entries, list) or not entries:
        raise CheckpointShapeError("a network entry must be a non-empty list of layers")
    layers = []
    for index, entry in enumerate(entries):
        try:
            spec = LayerSpec(int(entry["in"]), int(entry["out"]), str(entry["activation"]))
            weights = np.asarray(entry["weights"], dtype=np.float64)
            bias = np.asarray(entry["bias"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"layer {index} is malformed: {e}") from e
        try:
            spec.validate()
        except ConfigError as e:
            raise CheckpointShapeError(f"layer {index}: {e}") from e
        if weights.ndim != 1 or weights.size != spec.input_dim * spec.output_dim:
            raise CheckpointShapeError(
                f"layer {index}: expected {spec.input_dim * spec.output_dim} weights, got {weights.size}")
        if bias.ndim != 1 or bias.size != spec.output_dim:
            raise CheckpointShapeError(f"layer {index}: expected {spec.output_dim} biases, got {bias.size}")
        if layers and layers[-1].spec.output_dim != spec.input_dim:
            raise CheckpointShapeError(f"layer {index}: input width does not chain with the previous layer")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise CheckpointError(f"layer {index}: non-finite values")
        layers.append(Layer(spec, weights.reshape(spec.output_dim, spec.input_dim), bias))
    return NetParams(layers=layers)


def read_versioned_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise CheckpointError(f"{path}: expected a JSON object")
    if document.get("version") != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: unsupported version {document.get('version')!r}, "
                                     f"expected {FORMAT_VERSION}")
    return document


def save_params(params: NetParams, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"version": FORMAT_VERSION, "layers": params_to_layers(params)}, f)


def load_params(path: str) -> NetParams:
    document = read_versioned_json(path)
    if "layers" not in document:
        raise CheckpointError(f"{path}: missing 'layers'")
    return params_from_layers(document["layers"])
