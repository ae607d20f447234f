"""Alignment geometry: ROIs, similarity transforms and pose normalization.

Coordinates are image pixels with x to the right and y down.  Angles are in
radians and follow the on-screen counter-clockwise convention: rotating by
``a`` multiplies by ``[[cos a, sin a], [-sin a, cos a]]``.

``Roi.rotation`` is the on-screen tilt of the crop window.  Mapping image
points into the crop rotates them by ``-rotation``; for a ROI built from a
pose this brings the mid-hip to mid-shoulder axis upright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .topology import LEFT_HIP, LEFT_SHOULDER, NUM_KEYPOINTS, RIGHT_HIP, RIGHT_SHOULDER

DEFAULT_PADDING = 1.25


class DegeneratePoseError(ValueError):
    pass


class InvalidDetectionError(ValueError):
    pass


def normalize_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s], [-s, c]])


@dataclass
class Pose:
    points: np.ndarray
    visibility: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if self.visibility is None:
            self.visibility = np.ones(len(self.points))
        self.visibility = np.asarray(self.visibility, dtype=np.float64).reshape(-1)
        if self.points.shape != (NUM_KEYPOINTS, 2) or self.visibility.shape != (NUM_KEYPOINTS,):
            raise ValueError(
                f"pose needs {NUM_KEYPOINTS} points and visibilities, got "
                f"{self.points.shape} and {self.visibility.shape}"
            )
        if not np.all(np.isfinite(self.points)):
            raise ValueError("pose coordinates must be finite")
        if np.any(self.visibility < 0) or np.any(self.visibility > 1):
            raise ValueError("visibility must lie in [0, 1]")

    @property
    def mid_hip(self) -> np.ndarray:
        return midpoint(self.points[LEFT_HIP], self.points[RIGHT_HIP])

    @property
    def mid_shoulder(self) -> np.ndarray:
        return midpoint(self.points[LEFT_SHOULDER], self.points[RIGHT_SHOULDER])

    def copy(self) -> "Pose":
        return Pose(self.points.copy(), self.visibility.copy())


@dataclass(frozen=True)
class Roi:
    center_x: float
    center_y: float
    side: float
    rotation: float = 0.0

    def __post_init__(self):
        if not (self.side > 0 and math.isfinite(self.side)):
            raise ValueError(f"roi side must be positive, got {self.side}")
        object.__setattr__(self, "rotation", normalize_angle(self.rotation))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.center_x, self.center_y])


@dataclass(frozen=True)
class Detection:
    mid_hip: tuple[float, float]
    circle_radius: float
    incline: float
    score: float = 1.0


@dataclass(frozen=True)
class SimilarityTransform:
    """``p -> scale * rotation_matrix(rotation) @ p + (tx, ty)``."""

    rotation: float = 0.0
    scale: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("similarity scale must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return self.scale * rotation_matrix(self.rotation)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + np.array([self.tx, self.ty])

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        t = -inv_scale * rotation_matrix(-self.rotation) @ np.array([self.tx, self.ty])
        return SimilarityTransform(-self.rotation, inv_scale, float(t[0]), float(t[1]))

    def compose(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """``self ∘ other``: apply ``other`` first."""
        t = self.apply(np.array([other.tx, other.ty]))
        return SimilarityTransform(
            normalize_angle(self.rotation + other.rotation),
            self.scale * other.scale,
            float(t[0]),
            float(t[1]),
        )

    def to_dict(self) -> dict:
        return {"rotation": self.rotation, "scale": self.scale, "tx": self.tx, "ty": self.ty}


def midpoint(a, b) -> np.ndarray:
    return (np.asarray(a, dtype=np.float64) + np.asarray(b, dtype=np.float64)) / 2.0


def _axis_rotation(mid_hip: np.ndarray, mid_shoulder: np.ndarray) -> float:
    vx, vy = mid_shoulder - mid_hip
    if vx == 0.0 and vy == 0.0:
        raise DegeneratePoseError("mid-hip and mid-shoulder coincide")
    return normalize_angle(-math.pi / 2.0 - math.atan2(vy, vx))


def estimate_rotation(pose: Pose) -> float:
    """Tilt of the body axis; rotating the pose by minus this makes it upright."""
    return _axis_rotation(pose.mid_hip, pose.mid_shoulder)


def pose_to_roi(pose: Pose, padding: float = DEFAULT_PADDING) -> Roi:
    if padding < 1:
        raise ValueError("padding must be >= 1")
    center = pose.mid_hip
    rotation = estimate_rotation(pose)
    upright = (pose.points - center) @ rotation_matrix(-rotation).T
    half = float(np.max(np.abs(upright)))
    if half == 0.0:
        raise DegeneratePoseError("all keypoints coincide with mid-hip")
    return Roi(float(center[0]), float(center[1]), padding * 2.0 * half, rotation)


def detection_to_roi(det: Detection, padding: float = DEFAULT_PADDING) -> Roi:
    """Square ROI around the detector's person circle.

    A positive incline is a clockwise on-screen lean of the hip-to-shoulder
    axis, so the window tilts by ``-incline``.
    """
    if not det.circle_radius > 0:
        raise InvalidDetectionError(f"circle radius must be positive, got {det.circle_radius}")
    return Roi(
        float(det.mid_hip[0]),
        float(det.mid_hip[1]),
        2.0 * det.circle_radius * padding,
        -det.incline,
    )


def pose_to_detection(pose: Pose) -> Detection:
    """What an ideal person detector would report for ``pose``."""
    center = pose.mid_hip
    radius = float(np.max(np.linalg.norm(pose.points - center, axis=1)))
    return Detection((float(center[0]), float(center[1])), radius, -estimate_rotation(pose))


def roi_to_transform(roi: Roi, crop_size: float) -> SimilarityTransform:
    """Crop pixel coordinates ``[0, crop_size]^2`` to image coordinates."""
    if not crop_size > 0:
        raise ValueError("crop size must be positive")
    scale = roi.side / crop_size
    half = np.array([crop_size / 2.0, crop_size / 2.0])
    t = roi.center - scale * rotation_matrix(roi.rotation) @ half
    return SimilarityTransform(roi.rotation, scale, float(t[0]), float(t[1]))


def transform_pose(pose: Pose, t: SimilarityTransform) -> Pose:
    return Pose(t.apply(pose.points), pose.visibility.copy())


def image_to_crop_normalized(pose: Pose, roi: Roi) -> Pose:
    """Pose in crop coordinates scaled to the unit square."""
    return transform_pose(pose, roi_to_transform(roi, 1.0).inverse())


def crop_normalized_to_image(points, roi: Roi) -> np.ndarray:
    return roi_to_transform(roi, 1.0).apply(points)


def jitter_roi(
    roi: Roi,
    rng: np.random.Generator,
    scale_frac: float = 0.10,
    shift_frac: float = 0.10,
) -> Roi:
    if not (0 <= scale_frac < 1 and 0 <= shift_frac < 1):
        raise ValueError("jitter fractions must lie in [0, 1)")
    factor = rng.uniform(1.0 - scale_frac, 1.0 + scale_frac)
    dx, dy = rng.uniform(-shift_frac, shift_frac, size=2) * roi.side
    return Roi(roi.center_x + dx, roi.center_y + dy, roi.side * factor, roi.rotation)
