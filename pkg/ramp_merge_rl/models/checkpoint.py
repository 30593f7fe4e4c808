"""
Versioned JSON checkpoint holding the prediction and target heads of a
QTargetPair plus the metadata needed to rebuild the QNet exactly.
"""

import json
import logging
import os

from .network import FORMAT_VERSION, params_from_layers, params_to_layers, read_versioned_json
from .qfunction import NormalizationConstants, QNet, QTargetPair
from ..utils.common import CheckpointError, CheckpointShapeError, ensure_dir

logger = logging.getLogger(__name__)

HEAD_KEYS = ("A", "B", "C", "A_target", "B_target", "C_target")


def checkpoint_document(pair: QTargetPair) -> dict:
    prediction, target = pair.prediction, pair.target
    constants = prediction.constants
    return {
        "version": FORMAT_VERSION,
        "heads": {
            "A": params_to_layers(prediction.head_A),
            "B": params_to_layers(prediction.head_B),
            "C": params_to_layers(prediction.head_C),
            "A_target": params_to_layers(target.head_A),
            "B_target": params_to_layers(target.head_B),
            "C_target": params_to_layers(target.head_C),
        },
        "qnet": {
            "state_dim": prediction.state_dim,
            "a_min": prediction.a_min,
            "a_max": prediction.a_max,
            "a_floor": prediction.a_floor,
            "speed_scale": constants.speed_scale,
            "distance_scale": constants.distance_scale,
            "merge_point_x": constants.merge_point_x,
        },
    }


def save_checkpoint(pair: QTargetPair, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        ensure_dir(directory)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(checkpoint_document(pair), f)
    logger.info(f"Checkpoint saved to {path}")


def load_checkpoint(path: str) -> QTargetPair:
    """
    Rebuild a QTargetPair from disk. Either the whole pair is returned or an
    error is raised; nothing partial escapes.

    Raises:
        CheckpointVersionError: version tag is not 1
        CheckpointShapeError: weight or bias arrays do not match their layer dims
        CheckpointError: unreadable or incomplete document
    """
    document = read_versioned_json(path)
    heads = document.get("heads")
    meta = document.get("qnet")
    if not isinstance(heads, dict) or not isinstance(meta, dict):
        raise CheckpointError(f"{path}: missing 'heads' or 'qnet'")
    missing = [key for key in HEAD_KEYS if key not in heads]
    if missing:
        raise CheckpointError(f"{path}: missing heads {missing}")

    params = {key: params_from_layers(heads[key]) for key in HEAD_KEYS}
    try:
        state_dim = int(meta["state_dim"])
        constants = NormalizationConstants(float(meta["speed_scale"]), float(meta["distance_scale"]),
                                           float(meta["merge_point_x"]))
        bounds = dict(a_min=float(meta["a_min"]), a_max=float(meta["a_max"]), a_floor=float(meta["a_floor"]))
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: bad qnet metadata: {e}") from e
    for key, net in params.items():
        if net.input_dim != state_dim or net.output_dim != 1:
            raise CheckpointShapeError(f"{path}: head {key} is {net.input_dim}->{net.output_dim}, "
                                       f"expected {state_dim}->1")

    prediction = QNet(params["A"], params["B"], params["C"], constants=constants, **bounds)
    target = QNet(params["A_target"], params["B_target"], params["C_target"], constants=constants, **bounds)
    return QTargetPair(prediction=prediction, target=target)
