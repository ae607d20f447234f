"""Articulated 2D puppet with forward kinematics onto the 33-point topology.

The body frame is upright with the mid-hip at the origin, y pointing down and
lengths in units of torso length (mid-hip to mid-shoulder).  The puppet faces
the camera, so its left side is at +x.  Zero joint angles give a T-pose: arms
horizontal, legs straight down.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..geometry import Pose, rotation_matrix
from ..topology import NUM_KEYPOINTS

HIP_HALF_WIDTH = 0.25
SHOULDER_HALF_WIDTH = 0.4
NECK = 0.55
HEAD_RADIUS = 0.28
UPPER_ARM = 0.6
FOREARM = 0.55
THIGH = 0.75
SHIN = 0.7

# Keypoints in the head frame, origin at the head centre.
_FACE = {
    0: (0.0, 0.05),
    1: (0.05, -0.06),
    2: (0.10, -0.06),
    3: (0.15, -0.06),
    4: (-0.05, -0.06),
    5: (-0.10, -0.06),
    6: (-0.15, -0.06),
    7: (0.27, 0.0),
    8: (-0.27, 0.0),
    9: (0.08, 0.14),
    10: (-0.08, 0.14),
}

# Sampling ranges in degrees.  Narrow on purpose: the tracker sees aligned crops.
RANGES = {
    "lean": (-45.0, 45.0),
    "head": (-20.0, 20.0),
    "shoulder": (-80.0, 60.0),
    "elbow": (-30.0, 110.0),
    "wrist": (-30.0, 30.0),
    "hip": (-10.0, 40.0),
    "knee": (-30.0, 50.0),
    "foot": (-20.0, 20.0),
}


@dataclass
class PuppetParams:
    root_x: float
    root_y: float
    body_scale: float
    lean: float = 0.0
    head: float = 0.0
    # (left, right) pairs, radians
    shoulder: tuple[float, float] = (0.0, 0.0)
    elbow: tuple[float, float] = (0.0, 0.0)
    wrist: tuple[float, float] = (0.0, 0.0)
    hip: tuple[float, float] = (0.0, 0.0)
    knee: tuple[float, float] = (0.0, 0.0)
    foot: tuple[float, float] = (0.0, 0.0)
    colors: dict = field(default_factory=dict)
    texture_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _rot(v, angle):
    return rotation_matrix(angle) @ np.asarray(v, dtype=np.float64)


def body_frame_points(p: PuppetParams) -> np.ndarray:
    """All 33 keypoints in the upright body frame (torso units)."""
    pts = np.zeros((NUM_KEYPOINTS, 2))
    mid_shoulder = np.array([0.0, -1.0])
    pts[11] = (SHOULDER_HALF_WIDTH, -1.0)
    pts[12] = (-SHOULDER_HALF_WIDTH, -1.0)
    pts[23] = (HIP_HALF_WIDTH, 0.0)
    pts[24] = (-HIP_HALF_WIDTH, 0.0)

    head_center = mid_shoulder + _rot((0.0, -NECK), p.head)
    for k, offset in _FACE.items():
        pts[k] = head_center + _rot(offset, p.head)

    for side, sign in ((0, 1.0), (1, -1.0)):
        shoulder = pts[11 + side]
        # mirrored angles: positive always raises the arm / bends it upward
        upper = np.array([sign * math.cos(p.shoulder[side]), -math.sin(p.shoulder[side])])
        elbow = shoulder + UPPER_ARM * upper
        fore = _rot(upper, sign * p.elbow[side])
        wrist = elbow + FOREARM * fore
        hand = _rot(fore, sign * p.wrist[side])
        perp = np.array([hand[1], -hand[0]]) * sign
        pts[13 + side] = elbow
        pts[15 + side] = wrist
        pts[17 + side] = wrist + 0.18 * hand + 0.06 * perp
        pts[19 + side] = wrist + 0.20 * hand - 0.05 * perp
        pts[21 + side] = wrist + 0.10 * hand - 0.10 * perp

        hip = pts[23 + side]
        thigh = np.array([sign * math.sin(p.hip[side]), math.cos(p.hip[side])])
        knee = hip + THIGH * thigh
        shin = _rot(thigh, -sign * p.knee[side])
        ankle = knee + SHIN * shin
        outward = np.array([-shin[1], shin[0]]) * -sign
        foot_dir = _rot(outward, -sign * p.foot[side])
        pts[25 + side] = knee
        pts[27 + side] = ankle
        pts[29 + side] = ankle + 0.12 * shin - 0.04 * outward
        pts[31 + side] = ankle + 0.08 * shin + 0.22 * foot_dir
    return pts


def puppet_pose(p: PuppetParams) -> Pose:
    local = body_frame_points(p)
    world = p.body_scale * local @ rotation_matrix(p.lean).T + np.array([p.root_x, p.root_y])
    return Pose(world)


def head_center(p: PuppetParams) -> np.ndarray:
    local = np.array([0.0, -1.0]) + _rot((0.0, -NECK), p.head)
    return p.body_scale * rotation_matrix(p.lean) @ local + np.array([p.root_x, p.root_y])


def extent_margin(body_scale: float) -> float:
    """Pixels beyond the keypoints covered by head disc and limb thickness."""
    return 0.32 * body_scale


BASE_COLORS = {
    "background": (0.5, 0.5, 0.5),
    "torso": (0.35, 0.55, 0.35),
    "head": (0.93, 0.78, 0.62),
    "left_arm": (0.85, 0.2, 0.2),
    "right_arm": (0.2, 0.3, 0.9),
    "left_leg": (0.95, 0.6, 0.1),
    "right_leg": (0.1, 0.75, 0.8),
    "hand": (0.98, 0.9, 0.3),
    "foot": (0.25, 0.2, 0.15),
    "face": (0.15, 0.1, 0.1),
}


def _uniform_deg(rng, key, size=None):
    lo, hi = RANGES[key]
    return np.radians(rng.uniform(lo, hi, size=size))


def sample_articulation(rng: np.random.Generator) -> dict:
    pair = lambda key: tuple(float(a) for a in _uniform_deg(rng, key, size=2))  # noqa: E731
    return {
        "lean": float(_uniform_deg(rng, "lean")),
        "head": float(_uniform_deg(rng, "head")),
        "shoulder": pair("shoulder"),
        "elbow": pair("elbow"),
        "wrist": pair("wrist"),
        "hip": pair("hip"),
        "knee": pair("knee"),
        "foot": pair("foot"),
    }


def sample_colors(rng: np.random.Generator, jitter: float = 0.08) -> dict:
    return {
        name: tuple(float(c) for c in np.clip(np.array(rgb) + rng.uniform(-jitter, jitter, 3), 0, 1))
        for name, rgb in BASE_COLORS.items()
    }


def sample_puppet(
    rng: np.random.Generator,
    canvas: tuple[int, int] = (128, 128),
    scale_range: tuple[float, float] = (18.0, 26.0),
    upper_body: bool = False,
) -> tuple[PuppetParams, Pose]:
    """Random puppet placed on a ``(width, height)`` canvas.

    Full-body samples keep every keypoint (plus drawing margin) inside the
    canvas.  Upper-body samples put the hips near the bottom edge so that leg
    points leave the frame while hips and shoulders stay inside.
    """
    width, height = canvas
    for _ in range(100):
        art = sample_articulation(rng)
        scale = float(rng.uniform(*scale_range))
        params = PuppetParams(0.0, 0.0, scale, colors=sample_colors(rng),
                              texture_seed=int(rng.integers(2**31)), **art)
        pts = puppet_pose(params).points
        m = extent_margin(scale)
        lo = pts.min(axis=0) - m
        hi = pts.max(axis=0) + m
        if upper_body:
            x_lo, x_hi = -lo[0], width - hi[0]
            if x_hi <= x_lo:
                continue
            params.root_x = float(rng.uniform(x_lo, x_hi))
            params.root_y = float(height - rng.uniform(0.15, 0.5) * scale)
            pose = puppet_pose(params)
            torso = pose.points[[11, 12, 23, 24]]
            legs_out = np.any(pose.points[25:33, 1] >= height)
            top_ok = pose.points[:, 1].min() - m >= 0
            if legs_out and top_ok and np.all((torso >= 0) & (torso < [width, height])):
                return params, pose
            continue
        if np.any(hi - lo > [width, height]):
            continue
        params.root_x = float(rng.uniform(-lo[0], width - hi[0]))
        params.root_y = float(rng.uniform(-lo[1], height - hi[1]))
        return params, puppet_pose(params)
    raise RuntimeError("could not place a puppet on the canvas; enlarge it or shrink the scale")
