"""Shared builders for the test suite."""

import numpy as np

from posetrack.geometry import Pose
from posetrack.synthdata import sample_puppet


def torso_pose(mid_hip=(5.0, 5.0), mid_shoulder=(5.0, 1.0), half_width=1.0, fill=None):
    """Pose with hips/shoulders placed around the given midpoints; other points at ``fill`` (default mid-hip)."""
    pts = np.tile(np.asarray(fill if fill is not None else mid_hip, dtype=float), (33, 1))
    hip, sh = np.asarray(mid_hip, float), np.asarray(mid_shoulder, float)
    axis = sh - hip
    n = np.array([-axis[1], axis[0]])
    n = n / (np.linalg.norm(n) or 1.0) * half_width
    pts[23], pts[24] = hip + n, hip - n
    pts[11], pts[12] = sh + n, sh - n
    return Pose(pts)


def random_pose(rng, spread=30.0, center=(100.0, 100.0)):
    pts = rng.normal(size=(33, 2)) * spread + np.asarray(center)
    return Pose(pts, rng.integers(0, 2, size=33).astype(float))


def puppet_poses(n, seed=0):
    rng = np.random.default_rng(seed)
    return [sample_puppet(rng, (128, 128))[1] for _ in range(n)]


def naive_conv2d(x, k, stride=1):
    """Direct loop cross-correlation with TF-style 'same' padding."""
    n, c, h, w = x.shape
    f, _, kh, kw = k.shape
    ho, wo = -(-h // stride), -(-w // stride)
    ph = max((ho - 1) * stride + kh - h, 0)
    pw = max((wo - 1) * stride + kw - w, 0)
    top, left = ph // 2, pw // 2
    out = np.zeros((n, f, ho, wo))
    for b in range(n):
        for o in range(f):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ch in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                y = i * stride + u - top
                                xx = j * stride + v - left
                                if 0 <= y < h and 0 <= xx < w:
                                    acc += x[b, ch, y, xx] * k[o, ch, u, v]
                    out[b, o, i, j] = acc
    return out
