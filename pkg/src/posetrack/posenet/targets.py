from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class HeatmapTargets:
    heatmaps: np.ndarray  # (K, H, H)
    offsets: np.ndarray  # (2K, H, H), channel 2k = dx, 2k+1 = dy, in cells
    heatmap_mask: np.ndarray  # (K, H, H)
    offset_mask: np.ndarray  # (2K, H, H)


def heatmap_targets(keypoints, visibility, size: int, sigma: float = 2.0) -> HeatmapTargets:
    """Gaussian heatmaps and sub-cell offset targets for crop-normalized keypoints.

    The Gaussian peaks at exactly 1 on the cell containing the keypoint.
    Offsets are set on the 3x3 cells around it and give the keypoint position
    relative to each cell centre.  Invisible keypoints, and keypoints whose
    cell falls outside the grid, are fully masked.
    """
    kps = np.asarray(keypoints, dtype=np.float64).reshape(-1, 2)
    vis = np.asarray(visibility, dtype=np.float64).reshape(-1)
    k = len(kps)
    hm = np.zeros((k, size, size), dtype=np.float32)
    off = np.zeros((2 * k, size, size), dtype=np.float32)
    hm_mask = np.zeros((k, size, size), dtype=np.float32)
    off_mask = np.zeros((2 * k, size, size), dtype=np.float32)
    grid = np.arange(size)
    for i, ((x, y), v) in enumerate(zip(kps, vis)):
        u, w = x * size, y * size
        cx, cy = int(np.floor(u)), int(np.floor(w))
        if v <= 0 or not (0 <= cx < size and 0 <= cy < size):
            continue
        g = np.exp(-((grid[None, :] - cx) ** 2 + (grid[:, None] - cy) ** 2) / (2.0 * sigma**2))
        hm[i] = g
        hm_mask[i] = 1.0
        y0, y1 = max(cy - 1, 0), min(cy + 2, size)
        x0, x1 = max(cx - 1, 0), min(cx + 2, size)
        off[2 * i, y0:y1, x0:x1] = u - (grid[x0:x1][None, :] + 0.5)
        off[2 * i + 1, y0:y1, x0:x1] = w - (grid[y0:y1][:, None] + 0.5)
        off_mask[2 * i : 2 * i + 2, y0:y1, x0:x1] = 1.0
    return HeatmapTargets(hm, off, hm_mask, off_mask)


def batch_targets(keypoints, visibility, size: int, sigma: float) -> HeatmapTargets:
    parts = [heatmap_targets(k, v, size, sigma) for k, v in zip(keypoints, visibility)]
    return HeatmapTargets(*(np.stack([getattr(p, f) for p in parts]) for f in
                            ("heatmaps", "offsets", "heatmap_mask", "offset_mask")))


def decode_heatmap(heatmaps, offsets) -> np.ndarray:
    """Argmax cell plus its offset, normalized to the unit square.

    Accepts (K, H, W) / (2K, H, W) or batched (N, K, H, W) / (N, 2K, H, W).
    """
    hm = np.asarray(heatmaps)
    off = np.asarray(offsets)
    single = hm.ndim == 3
    if single:
        hm, off = hm[None], off[None]
    n, k, h, w = hm.shape
    flat = hm.reshape(n, k, -1).argmax(axis=2)
    iy, ix = np.divmod(flat, w)
    off = off.reshape(n, k, 2, h, w)
    nn, kk = np.meshgrid(np.arange(n), np.arange(k), indexing="ij")
    dx = off[nn, kk, 0, iy, ix]
    dy = off[nn, kk, 1, iy, ix]
    coords = np.stack([(ix + 0.5 + dx) / w, (iy + 0.5 + dy) / h], axis=-1)
    return coords[0] if single else coords
