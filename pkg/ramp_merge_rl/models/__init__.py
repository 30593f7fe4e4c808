"""
Numpy networks and the quadratic Q-function built on them.
"""

from .network import LayerSpec, NetParams, Gradients, init, forward, backward, sgd_step, save_params, load_params
from .qfunction import (
    NormalizationConstants,
    QNet,
    QTargetPair,
    build_pair,
    coeffs,
    loss_and_grads,
    normalize,
    optimal_action,
    q_value,
    sync_target,
    td_target,
)
from .checkpoint import save_checkpoint, load_checkpoint
