from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensorcore as tc
from ..tensorcore import Tensor
from .network import LossWeights, NetworkOutputs
from .targets import HeatmapTargets


@dataclass
class LossTerms:
    total: Tensor
    heatmap: float
    offset: float
    regression: float
    visibility: float


def total_loss(
    outputs: NetworkOutputs,
    coords_target,
    visibility_labels,
    weights: LossWeights,
    heatmap_targets: HeatmapTargets | None = None,
) -> LossTerms:
    """Weighted sum of heatmap BCE, offset L2, coordinate L2 and class-weighted visibility BCE.

    Coordinates are supervised only where the label marks the point visible.
    Terms with zero weight are left out of the graph entirely.
    """
    vis = np.asarray(visibility_labels, dtype=outputs.coords.dtype)
    n, k = vis.shape
    coord_mask = np.repeat(vis, 2, axis=1)
    target = np.asarray(coords_target, dtype=outputs.coords.dtype).reshape(n, 2 * k)

    parts: list[Tensor] = []
    values = {}
    reg = tc.mse_loss(outputs.coords, target, coord_mask)
    values["regression"] = float(reg.data)
    if weights.regression:
        parts.append(tc.scale(reg, weights.regression))
    # occluded points are the minority class; visible ones are down-weighted
    vis_weight = np.where(vis > 0.5, 1.0 / weights.occluded, 1.0)
    vl = tc.bce_with_logits(outputs.visibility_logits, vis, vis_weight)
    values["visibility"] = float(vl.data)
    if weights.visibility:
        parts.append(tc.scale(vl, weights.visibility))

    values["heatmap"] = values["offset"] = 0.0
    if heatmap_targets is not None and outputs.heatmaps is not None:
        hm = tc.bce_with_logits(outputs.heatmaps, heatmap_targets.heatmaps, heatmap_targets.heatmap_mask)
        off = tc.mse_loss(outputs.offsets, heatmap_targets.offsets, heatmap_targets.offset_mask)
        values["heatmap"] = float(hm.data)
        values["offset"] = float(off.data)
        if weights.heatmap:
            parts.append(tc.scale(hm, weights.heatmap))
        if weights.offset:
            parts.append(tc.scale(off, weights.offset))
    if not parts:
        parts.append(tc.scale(reg, 0.0))
    return LossTerms(tc.total(parts), **values)
