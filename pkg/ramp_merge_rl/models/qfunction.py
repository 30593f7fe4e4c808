"""
Quadratic continuous-action Q-function.

    Q(s, a) = A(s) * (B(s) - a)^2 + C(s)

A, B and C are produced by three independent networks. A is squashed to be
strictly negative so Q is strictly concave in a, and B is squashed into the
action range, so the greedy action is B(s) and max_a Q(s, a) = C(s).
"""

from dataclasses import dataclass, field
from functools import singledispatch
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, logit

from .network import Gradients, LayerSpec, NetParams, backward, forward, init, sgd_step
from ..env.base import A_MAX, A_MIN
from ..env.merge_env import Observation
from ..env.toy_mdp import ToyMdpState
from ..utils.common import NumericError, UsageError
from ..utils.reward import SPEED_LIMIT

MERGE_STATE_DIM = 6
TOY_STATE_DIM = 1


@dataclass(frozen=True)
class NormalizationConstants:
    speed_scale: float = SPEED_LIMIT
    distance_scale: float = 150.0
    merge_point_x: float = 0.0


@singledispatch
def normalize(obs, constants: NormalizationConstants = NormalizationConstants()) -> np.ndarray:
    raise UsageError(f"cannot normalize observations of type {type(obs).__name__}")


@normalize.register
def _(obs: Observation, constants: NormalizationConstants = NormalizationConstants()) -> np.ndarray:
    speed, dist = constants.speed_scale, constants.distance_scale
    return np.array([
        obs.v_ev / speed,
        (obs.p_ev - constants.merge_point_x) / dist,
        obs.v_gfv / speed,
        (obs.p_gfv - obs.p_ev) / dist,
        obs.v_gbv / speed,
        (obs.p_gbv - obs.p_ev) / dist,
    ], dtype=np.float64)


@normalize.register
def _(obs: ToyMdpState, constants: NormalizationConstants = NormalizationConstants()) -> np.ndarray:
    return np.array([obs.v / constants.speed_scale], dtype=np.float64)


@dataclass(eq=False)
class QNet:
    head_A: NetParams
    head_B: NetParams
    head_C: NetParams
    a_min: float = A_MIN
    a_max: float = A_MAX
    a_floor: float = 0.01
    constants: NormalizationConstants = field(default_factory=NormalizationConstants)

    @property
    def state_dim(self) -> int:
        return self.head_A.input_dim

    @property
    def heads(self) -> Tuple[NetParams, NetParams, NetParams]:
        return self.head_A, self.head_B, self.head_C

    def copy(self) -> "QNet":
        return QNet(self.head_A.copy(), self.head_B.copy(), self.head_C.copy(),
                    self.a_min, self.a_max, self.a_floor, self.constants)

    def equals(self, other: "QNet") -> bool:
        return (all(a.equals(b) for a, b in zip(self.heads, other.heads))
                and (self.a_min, self.a_max, self.a_floor, self.constants)
                == (other.a_min, other.a_max, other.a_floor, other.constants))


@dataclass(eq=False)
class QTargetPair:
    prediction: QNet
    target: QNet


@dataclass(eq=False)
class QGradients:
    A: Gradients
    B: Gradients
    C: Gradients

    def all_finite(self) -> bool:
        return self.A.all_finite() and self.B.all_finite() and self.C.all_finite()


def build_qnet(state_dim: int, rng: np.random.Generator, hidden_units: int = 64,
               hidden_activation: str = "tanh", a_floor: float = 0.01,
               constants: NormalizationConstants = NormalizationConstants(),
               init_action: Optional[float] = None) -> QNet:
    """
    Three Glorot-initialized heads. With init_action set, the B head starts
    flat: zero output weights and a bias that squashes to init_action, so the
    untrained greedy action is init_action in every state.
    """
    specs = [LayerSpec(state_dim, hidden_units, hidden_activation), LayerSpec(hidden_units, 1, "identity")]
    qnet = QNet(head_A=init(specs, rng), head_B=init(specs, rng), head_C=init(specs, rng),
                a_floor=a_floor, constants=constants)
    if init_action is not None:
        if not qnet.a_min < init_action < qnet.a_max:
            raise UsageError(f"init_action must lie strictly inside ({qnet.a_min}, {qnet.a_max})")
        out = qnet.head_B.layers[-1]
        out.weights[:] = 0.0
        out.bias[:] = logit((init_action - qnet.a_min) / (qnet.a_max - qnet.a_min))
    return qnet


def build_pair(state_dim: int, rng: np.random.Generator, **kwargs) -> QTargetPair:
    prediction = build_qnet(state_dim, rng, **kwargs)
    return QTargetPair(prediction=prediction, target=prediction.copy())


def _squash(qnet: QNet, raw_A, raw_B, raw_C):
    A = -np.logaddexp(0.0, raw_A) - qnet.a_floor
    B = qnet.a_min + (qnet.a_max - qnet.a_min) * expit(raw_B)
    return A, B, raw_C


def coeffs(qnet: QNet, s: np.ndarray):
    """
    Coefficients of the quadratic at state(s) s.

    Args:
        qnet: Q-function
        s: normalized state (d,) or batch (n, d)

    Returns:
        (A, B, C) as floats for a single state, arrays of shape (n,) for a batch
    """
    raws = [forward(head, s)[0] for head in qnet.heads]
    A, B, C = _squash(qnet, *(raw[..., 0] for raw in raws))
    if np.ndim(s) == 1:
        return float(A), float(B), float(C)
    return A, B, C


def optimal_action(qnet: QNet, s: np.ndarray):
    return coeffs(qnet, s)[1]


def q_value(qnet: QNet, s: np.ndarray, a):
    A, B, C = coeffs(qnet, s)
    return A * (B - a) ** 2 + C


def td_target(pair: QTargetPair, r, s_next: np.ndarray, terminal, gamma: float):
    """r at terminal transitions, r + gamma * max_a' Q_target(s', a') = r + gamma * C_target(s') otherwise.
    Accepts scalars or aligned batches."""
    C_next = coeffs(pair.target, s_next)[2]
    if np.ndim(r) == 0:
        return float(r) if terminal else float(r + gamma * C_next)
    return np.where(terminal, r, r + gamma * C_next)


def stack_batch(batch: Sequence) -> Tuple[np.ndarray, ...]:
    """Stack transitions (objects with s, a, r, s_next, terminal) into arrays."""
    if len(batch) == 0:
        raise UsageError("empty mini-batch")
    s = np.stack([np.asarray(t.s, dtype=np.float64) for t in batch])
    a = np.array([t.a for t in batch], dtype=np.float64)
    r = np.array([t.r for t in batch], dtype=np.float64)
    s_next = np.stack([np.asarray(t.s_next, dtype=np.float64) for t in batch])
    terminal = np.array([t.terminal for t in batch], dtype=bool)
    return s, a, r, s_next, terminal


def loss_and_grads(pair: QTargetPair, batch: Sequence, gamma: float) -> Tuple[float, QGradients]:
    """
    Mean squared TD error over the mini-batch and its gradients with respect
    to the prediction heads. Targets come from the target network and are
    treated as constants.

    Args:
        pair: prediction/target networks
        batch: transitions with s, a, r, s_next, terminal
        gamma: discount factor

    Returns:
        (loss, gradients for heads A, B, C)
    """
    s, a, r, s_next, terminal = stack_batch(batch)
    m = len(a)
    q_target = td_target(pair, r, s_next, terminal, gamma)

    qnet = pair.prediction
    raw_A, cache_A = forward(qnet.head_A, s)
    raw_B, cache_B = forward(qnet.head_B, s)
    raw_C, cache_C = forward(qnet.head_C, s)
    A, B, C = _squash(qnet, raw_A[:, 0], raw_B[:, 0], raw_C[:, 0])
    diff = B - a
    q_pred = A * diff ** 2 + C

    err = q_pred - q_target
    loss = float(np.mean(err ** 2))
    dq = 2.0 * err / m

    sig_B = expit(raw_B[:, 0])
    d_raw_A = dq * diff ** 2 * -expit(raw_A[:, 0])
    d_raw_B = dq * 2.0 * A * diff * (qnet.a_max - qnet.a_min) * sig_B * (1.0 - sig_B)
    d_raw_C = dq

    grads_A, _ = backward(qnet.head_A, cache_A, d_raw_A[:, None])
    grads_B, _ = backward(qnet.head_B, cache_B, d_raw_B[:, None])
    grads_C, _ = backward(qnet.head_C, cache_C, d_raw_C[:, None])
    return loss, QGradients(grads_A, grads_B, grads_C)


def apply_gradients(qnet: QNet, grads: QGradients, lr: float) -> QNet:
    """SGD step on all three heads; nothing is updated if any gradient is non-finite."""
    if not grads.all_finite():
        raise NumericError("non-finite gradient rejected")
    sgd_step(qnet.head_A, grads.A, lr)
    sgd_step(qnet.head_B, grads.B, lr)
    sgd_step(qnet.head_C, grads.C, lr)
    return qnet


def sync_target(pair: QTargetPair) -> QTargetPair:
    pair.target = pair.prediction.copy()
    return pair
