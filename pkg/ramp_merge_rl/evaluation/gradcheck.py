"""
Central finite-difference checks of the analytic gradients.
"""

import logging
from types import SimpleNamespace
from typing import List, Sequence, Tuple

import numpy as np

from ..env.base import A_MAX, A_MIN
from ..models.network import Gradients, LayerSpec, NetParams, backward, forward, init
from ..models.qfunction import QTargetPair, build_qnet, loss_and_grads

logger = logging.getLogger(__name__)

NETWORK_SHAPES = (
    [LayerSpec(6, 16, "tanh"), LayerSpec(16, 1, "identity")],
    [LayerSpec(6, 12, "sigmoid"), LayerSpec(12, 8, "softplus"), LayerSpec(8, 3, "tanh")],
    [LayerSpec(4, 5, "identity"), LayerSpec(5, 2, "sigmoid")],
)


def relative_error(analytic: float, numeric: float, floor: float = 1e-5) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), floor)


def _parameter_slots(params: NetParams, grads: Gradients) -> List[Tuple[np.ndarray, np.ndarray]]:
    slots = []
    for layer, gw, gb in zip(params.layers, grads.weights, grads.biases):
        slots.append((layer.weights, gw))
        slots.append((layer.bias, gb))
    return slots


def _check_slots(slots, loss_fn, rng: np.random.Generator, coords: int, h: float) -> float:
    worst = 0.0
    for _ in range(coords):
        param, grad = slots[int(rng.integers(len(slots)))]
        index = tuple(int(rng.integers(n)) for n in param.shape)
        original = param[index]
        param[index] = original + h
        up = loss_fn()
        param[index] = original - h
        down = loss_fn()
        param[index] = original
        worst = max(worst, relative_error(float(grad[index]), (up - down) / (2.0 * h)))
    return worst


def check_network_gradients(rng: np.random.Generator, trials: int = 100, coords: int = 20,
                            h: float = 1e-5, shapes: Sequence = NETWORK_SHAPES) -> float:
    """Max relative error of backward() against finite differences of
    L = sum(y * g) over random nets, inputs and cotangents g."""
    worst = 0.0
    for trial in range(trials):
        specs = shapes[trial % len(shapes)]
        params = init(specs, rng)
        for layer in params.layers:
            layer.bias[:] = rng.normal(0.0, 0.5, size=layer.bias.shape)
        x = rng.normal(size=(4, specs[0].input_dim))
        cotangent = rng.normal(size=(4, specs[-1].output_dim))

        y, cache = forward(params, x)
        grads, _ = backward(params, cache, cotangent)

        def loss_fn():
            return float(np.sum(forward(params, x)[0] * cotangent))

        worst = max(worst, _check_slots(_parameter_slots(params, grads), loss_fn, rng, coords, h))
    logger.info(f"network gradcheck: max relative error {worst:.3e} over {trials} nets")
    return worst


def random_batch(rng: np.random.Generator, size: int, state_dim: int) -> List[SimpleNamespace]:
    return [
        SimpleNamespace(
            s=rng.normal(size=state_dim),
            a=float(rng.uniform(A_MIN, A_MAX)),
            r=float(rng.uniform(-2.0, 0.0)),
            s_next=rng.normal(size=state_dim),
            terminal=bool(rng.random() < 0.2),
        )
        for _ in range(size)
    ]


def check_loss_gradients(rng: np.random.Generator, batches: int = 100, batch_size: int = 8,
                         state_dim: int = 6, hidden_units: int = 64, coords: int = 20,
                         h: float = 1e-5, gamma: float = 0.95) -> float:
    """Max relative error of the TD-loss gradients through all three heads."""
    worst = 0.0
    for _ in range(batches):
        pair = QTargetPair(prediction=build_qnet(state_dim, rng, hidden_units),
                           target=build_qnet(state_dim, rng, hidden_units))
        batch = random_batch(rng, batch_size, state_dim)
        _, grads = loss_and_grads(pair, batch, gamma)

        def loss_fn():
            return loss_and_grads(pair, batch, gamma)[0]

        slots = []
        for head, head_grads in zip(pair.prediction.heads, (grads.A, grads.B, grads.C)):
            slots.extend(_parameter_slots(head, head_grads))
        worst = max(worst, _check_slots(slots, loss_fn, rng, coords, h))
    logger.info(f"loss gradcheck: max relative error {worst:.3e} over {batches} batches")
    return worst
