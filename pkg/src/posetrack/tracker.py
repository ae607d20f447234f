"""Detector-tracker loop.

The detector runs only while no person is being tracked.  Once tracking, each
frame's ROI comes from the previous frame's predicted pose; when presence
falls below the threshold the detector runs again on the next frame.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .geometry import (
    DEFAULT_PADDING,
    DegeneratePoseError,
    Detection,
    Pose,
    Roi,
    detection_to_roi,
    pose_to_detection,
    pose_to_roi,
)
from .topology import TORSO


class TrackingError(RuntimeError):
    def __init__(self, frame: int, cause: BaseException):
        super().__init__(f"frame {frame}: {cause}")
        self.frame = frame
        self.cause = cause


class Detector(Protocol):
    def __call__(self, image: np.ndarray, frame: int) -> Detection | None: ...


class PoseModel(Protocol):
    def __call__(self, image: np.ndarray, roi: Roi) -> Pose: ...


@dataclass
class TrackerConfig:
    presence_threshold: float = 0.5
    roi_padding: float = DEFAULT_PADDING
    crop_size: int = 64

    def __post_init__(self):
        if not 0 < self.presence_threshold < 1:
            raise ValueError("presence threshold must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown tracker config keys: {sorted(unknown)}")
        return cls(**d)


class Mode(enum.Enum):
    AWAITING_DETECTION = "awaiting_detection"
    TRACKING = "tracking"


@dataclass(frozen=True)
class FrameResult:
    frame: int
    pose: Pose | None
    presence: float
    roi_used: Roi | None
    detector_ran: bool
    lost: bool

    @property
    def person(self) -> bool:
        return self.pose is not None

    def to_json(self) -> str:
        pose = None
        if self.pose is not None:
            pose = {
                "keypoints": [[round(float(x), 4), round(float(y), 4)] for x, y in self.pose.points],
                "visibility": [round(float(v), 4) for v in self.pose.visibility],
            }
        return json.dumps(
            {
                "frame": self.frame,
                "detector_ran": self.detector_ran,
                "presence": round(self.presence, 6),
                "pose": pose,
                "lost": self.lost,
            }
        )


@dataclass(frozen=True)
class TrackerState:
    mode: Mode = Mode.AWAITING_DETECTION
    roi: Roi | None = None
    frame: int = 0
    last: FrameResult | None = None


def presence_score(visibility) -> float:
    """Mean visibility of both shoulders and both hips."""
    vis = np.asarray(visibility, dtype=np.float64)
    return float(np.mean(vis[list(TORSO)]))


def process_frame(
    state: TrackerState,
    image: np.ndarray,
    detector: Detector,
    model: PoseModel,
    config: TrackerConfig | None = None,
) -> tuple[FrameResult, TrackerState]:
    config = config or TrackerConfig()
    frame = state.frame + 1
    detector_ran = False
    try:
        if state.mode is Mode.TRACKING and state.roi is not None:
            roi = state.roi
        else:
            detector_ran = True
            det = detector(image, frame)
            if det is None:
                result = FrameResult(frame, None, 0.0, None, True, False)
                return result, TrackerState(Mode.AWAITING_DETECTION, None, frame, result)
            roi = detection_to_roi(det, config.roi_padding)
        pose = model(image, roi)
    except Exception as exc:  # noqa: BLE001 - re-raised with the frame attached
        raise TrackingError(frame, exc) from exc

    presence = presence_score(pose.visibility)
    next_roi = None
    if presence >= config.presence_threshold:
        try:
            next_roi = pose_to_roi(pose, config.roi_padding)
        except DegeneratePoseError:
            next_roi = None
    lost = next_roi is None
    result = FrameResult(frame, pose, presence, roi, detector_ran, lost)
    if lost:
        return result, TrackerState(Mode.AWAITING_DETECTION, None, frame, result)
    return result, TrackerState(Mode.TRACKING, next_roi, frame, result)


@dataclass
class ClipResult:
    results: list[FrameResult]

    @property
    def detector_frames(self) -> list[int]:
        return [r.frame for r in self.results if r.detector_ran]

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.results)


def run_clip(
    frames: Iterable[np.ndarray],
    detector: Detector,
    model: PoseModel,
    config: TrackerConfig | None = None,
) -> ClipResult:
    state = TrackerState()
    results = []
    for image in frames:
        result, state = process_frame(state, image, detector, model, config)
        results.append(result)
    if not results:
        raise ValueError("clip has no frames")
    return ClipResult(results)


class NullDetector:
    """Never finds anyone."""

    def __init__(self):
        self.calls: list[int] = []

    def __call__(self, image, frame):
        self.calls.append(frame)
        return None


class OracleDetector:
    """Derives detections from ground-truth poses, optionally perturbed.

    ``noise`` scales Gaussian perturbations: centre by ``noise * radius``,
    radius by a factor ``1 + noise * N(0, 1)``, incline by ``noise`` radians.
    """

    def __init__(self, poses: Sequence[Pose | None], noise: float = 0.0, seed: int = 0):
        self.poses = list(poses)
        self.noise = noise
        self.seed = seed
        self.calls: list[int] = []

    def __call__(self, image, frame: int) -> Detection | None:
        self.calls.append(frame)
        if not 1 <= frame <= len(self.poses) or self.poses[frame - 1] is None:
            return None
        det = pose_to_detection(self.poses[frame - 1])
        if self.noise <= 0:
            return det
        rng = np.random.default_rng([self.seed, frame])
        dx, dy, dr, da = rng.normal(size=4) * self.noise
        r = det.circle_radius
        return replace(
            det,
            mid_hip=(det.mid_hip[0] + dx * r, det.mid_hip[1] + dy * r),
            circle_radius=max(r * (1.0 + dr), 1e-6),
            incline=det.incline + da,
        )


class NetworkModel:
    """Adapts a trained network to the tracker's model port."""

    def __init__(self, network):
        from .posenet.inference import predict_in_roi

        self._predict = predict_in_roi
        self.network = network

    def __call__(self, image: np.ndarray, roi: Roi) -> Pose:
        return self._predict(self.network, image, roi)
