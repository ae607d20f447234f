"""Occlusion rectangles, bilinear rotated crops and training-sample assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose, Roi, image_to_crop_normalized, roi_to_transform


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    width: float
    height: float
    color: tuple[float, float, float]

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return (
            (pts[:, 0] >= self.x0)
            & (pts[:, 0] < self.x0 + self.width)
            & (pts[:, 1] >= self.y0)
            & (pts[:, 1] < self.y0 + self.height)
        )


@dataclass
class OcclusionConfig:
    max_rects: int = 3
    min_frac: float = 0.10
    max_frac: float = 0.50


@dataclass
class TrainingSample:
    image: np.ndarray  # (3, S, S) float32
    keypoints: np.ndarray  # (K, 2) crop-normalized
    visibility: np.ndarray  # (K,) in {0, 1}


def sample_rects(rng, width, height, config: OcclusionConfig, ref_side=None) -> list[Rect]:
    ref = float(ref_side if ref_side is not None else min(width, height))
    count = int(rng.integers(0, config.max_rects + 1))
    rects = []
    for _ in range(count):
        w, h = rng.uniform(config.min_frac, config.max_frac, size=2) * ref
        x0 = rng.uniform(0, max(width - w, 0))
        y0 = rng.uniform(0, max(height - h, 0))
        color = tuple(float(c) for c in rng.uniform(0, 1, size=3))
        rects.append(Rect(float(x0), float(y0), float(w), float(h), color))
    return rects


def draw_rects(image: np.ndarray, rects) -> np.ndarray:
    """Fill every pixel whose centre lies inside a rectangle."""
    out = image.copy()
    h, w = image.shape[:2]
    centers_x = np.arange(w) + 0.5
    centers_y = np.arange(h) + 0.5
    for r in rects:
        cols = (centers_x >= r.x0) & (centers_x < r.x0 + r.width)
        rows = (centers_y >= r.y0) & (centers_y < r.y0 + r.height)
        out[np.ix_(rows, cols)] = r.color
    return out


def visibility_from_rects(points, rects) -> np.ndarray:
    hidden = np.zeros(len(points), dtype=bool)
    for r in rects:
        hidden |= r.contains(points)
    return (~hidden).astype(np.float64)


def occlude(
    image: np.ndarray,
    pose: Pose,
    rng: np.random.Generator,
    config: OcclusionConfig | None = None,
    ref_side: float | None = None,
    rects: list[Rect] | None = None,
) -> tuple[np.ndarray, np.ndarray, list[Rect]]:
    """Draw random coloured rectangles; label a keypoint 0 iff one covers it.

    Keypoint coordinates are left alone: occluded points keep their true
    position.  ``image`` is ``(H, W, 3)``.
    """
    config = config or OcclusionConfig()
    h, w = image.shape[:2]
    if rects is None:
        rects = sample_rects(rng, w, h, config, ref_side)
    return draw_rects(image, rects), visibility_from_rects(pose.points, rects), rects


def sample_bilinear(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``(H, W, C)`` at continuous coordinates (pixel centres at +0.5).

    Outside the image the signal is zero.
    """
    h, w = image.shape[:2]
    u = xs - 0.5
    v = ys - 0.5
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    fx = (u - x0)[..., None]
    fy = (v - y0)[..., None]
    out = np.zeros(xs.shape + image.shape[2:], dtype=np.float64)
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            yi, xi = y0 + dy, x0 + dx
            ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            vals = image[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)] * ok[..., None]
            out += wx * wy * vals
    return out


def crop_image(image: np.ndarray, roi: Roi, crop_size: int) -> np.ndarray:
    """Rotated square crop, ``(crop_size, crop_size, C)``."""
    t = roi_to_transform(roi, crop_size)
    grid = np.arange(crop_size) + 0.5
    cx, cy = np.meshgrid(grid, grid)
    pts = t.apply(np.stack([cx.ravel(), cy.ravel()], axis=1))
    out = sample_bilinear(image, pts[:, 0].reshape(crop_size, crop_size), pts[:, 1].reshape(crop_size, crop_size))
    return out.astype(np.float32)


def crop_sample(image: np.ndarray, pose: Pose, roi: Roi, crop_size: int) -> TrainingSample:
    crop = crop_image(image, roi, crop_size)
    local = image_to_crop_normalized(pose, roi)
    return TrainingSample(
        np.ascontiguousarray(crop.transpose(2, 0, 1)),
        local.points.astype(np.float32),
        pose.visibility.astype(np.float32),
    )
