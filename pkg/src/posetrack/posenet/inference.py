from __future__ import annotations

import numpy as np

from ..geometry import Pose, Roi, crop_normalized_to_image, pose_to_roi, DEFAULT_PADDING
from ..synthdata.augment import crop_image
from ..tensorcore import no_grad
from ..tensorcore.ops import _stable_sigmoid
from .network import PoseNet


def infer(model: PoseNet, crops) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates (crop-normalized, unclipped) and visibility probabilities.

    ``crops`` is (3, S, S) or (N, 3, S, S) in [0, 1].
    """
    arr = np.asarray(crops, dtype=model.dtype)
    single = arr.ndim == 3
    if single:
        arr = arr[None]
    s = model.config.input_size
    if arr.ndim != 4 or arr.shape[1:] != (3, s, s):
        raise ValueError(f"crop must have shape (3, {s}, {s}), got {np.shape(crops)}")
    with no_grad():
        out = model.forward(arr, heads=False)
    k = model.config.num_keypoints
    coords = out.coords.data.reshape(-1, k, 2)
    vis = _stable_sigmoid(out.visibility_logits.data)
    return (coords[0], vis[0]) if single else (coords, vis)


def predict_in_roi(model: PoseNet, image: np.ndarray, roi: Roi) -> Pose:
    """Run the network on the ROI crop of an (H, W, 3) image; pose in image pixels."""
    crop = crop_image(image, roi, model.config.input_size).transpose(2, 0, 1)
    coords, vis = infer(model, crop)
    return Pose(crop_normalized_to_image(coords.astype(np.float64), roi), np.clip(vis, 0.0, 1.0))


class AlignedPredictor:
    """Predict inside the ROI aligned on the ground-truth pose.

    Mirrors tracking from a correct previous frame, the setting the network is
    trained for.
    """

    def __init__(self, model: PoseNet, padding: float = DEFAULT_PADDING):
        self.model = model
        self.padding = padding

    def __call__(self, image: np.ndarray, gt: Pose) -> Pose:
        return predict_in_roi(self.model, image, pose_to_roi(gt, self.padding))
