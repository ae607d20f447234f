from __future__ import annotations

import numpy as np

from .puppet import BASE_COLORS, HEAD_RADIUS, PuppetParams, head_center, puppet_pose

# Capsule radii in torso units.
_LIMBS = (
    # (from, to, radius, color key)
    (23, 25, 0.12, "left_leg"),
    (25, 27, 0.10, "left_leg"),
    (24, 26, 0.12, "right_leg"),
    (26, 28, 0.10, "right_leg"),
    (29, 31, 0.05, "foot"),
    (30, 32, 0.05, "foot"),
)
_ARMS = (
    (11, 13, 0.09, "left_arm"),
    (13, 15, 0.08, "left_arm"),
    (12, 14, 0.09, "right_arm"),
    (14, 16, 0.08, "right_arm"),
)


def background_texture(width: int, height: int, seed: int, color=None) -> np.ndarray:
    """Smooth low-frequency colour noise in roughly [0.15, 0.85]."""
    rng = np.random.default_rng(seed)
    grid = rng.uniform(0.15, 0.85, size=(5, 5, 3))
    ys = np.linspace(0, 4, height)
    xs = np.linspace(0, 4, width)
    y0 = np.minimum(ys.astype(int), 3)
    x0 = np.minimum(xs.astype(int), 3)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    g00 = grid[y0][:, x0]
    g01 = grid[y0][:, x0 + 1]
    g10 = grid[y0 + 1][:, x0]
    g11 = grid[y0 + 1][:, x0 + 1]
    img = (1 - fy) * ((1 - fx) * g00 + fx * g01) + fy * ((1 - fx) * g10 + fx * g11)
    freq = rng.uniform(0.05, 0.2, size=2)
    phase = rng.uniform(0, 2 * np.pi)
    yy, xx = np.mgrid[0:height, 0:width]
    img += 0.06 * np.sin(freq[0] * xx + freq[1] * yy + phase)[:, :, None]
    if color is not None:
        img = 0.7 * img + 0.3 * np.asarray(color)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _paint(img, coverage, color):
    a = coverage[:, :, None]
    img *= 1 - a
    img += a * np.asarray(color, dtype=np.float32)


def _window(img, lo, hi):
    h, w = img.shape[:2]
    x0, y0 = max(int(np.floor(lo[0])), 0), max(int(np.floor(lo[1])), 0)
    x1, y1 = min(int(np.ceil(hi[0])) + 1, w), min(int(np.ceil(hi[1])) + 1, h)
    return x0, y0, x1, y1


def draw_capsule(img: np.ndarray, a, b, radius: float, color) -> None:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x0, y0, x1, y1 = _window(img, np.minimum(a, b) - radius - 1, np.maximum(a, b) + radius + 1)
    if x1 <= x0 or y1 <= y0:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    px, py = xx + 0.5, yy + 0.5
    d = b - a
    denom = float(d @ d)
    t = np.zeros_like(px) if denom == 0 else np.clip(((px - a[0]) * d[0] + (py - a[1]) * d[1]) / denom, 0, 1)
    dist = np.hypot(px - (a[0] + t * d[0]), py - (a[1] + t * d[1]))
    cov = np.clip(radius - dist + 0.5, 0.0, 1.0).astype(np.float32)
    _paint(img[y0:y1, x0:x1], cov, color)


def draw_disc(img: np.ndarray, center, radius: float, color) -> None:
    draw_capsule(img, center, center, radius, color)


def draw_quad(img: np.ndarray, corners, color) -> None:
    """Convex quadrilateral with corners in order; one-pixel anti-aliased edge."""
    c = np.asarray(corners, dtype=np.float64)
    x0, y0, x1, y1 = _window(img, c.min(axis=0) - 1, c.max(axis=0) + 1)
    if x1 <= x0 or y1 <= y0:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    px, py = xx + 0.5, yy + 0.5
    centroid = c.mean(axis=0)
    inside = np.full(px.shape, np.inf)
    for i in range(4):
        p, q = c[i], c[(i + 1) % 4]
        e = q - p
        n = np.array([e[1], -e[0]]) / (np.hypot(*e) or 1.0)
        if (centroid - p) @ n < 0:
            n = -n
        inside = np.minimum(inside, (px - p[0]) * n[0] + (py - p[1]) * n[1])
    cov = np.clip(inside + 0.5, 0.0, 1.0).astype(np.float32)
    _paint(img[y0:y1, x0:x1], cov, color)


def render_puppet(params: PuppetParams, canvas: tuple[int, int] = (128, 128)) -> np.ndarray:
    """Render to an ``(height, width, 3)`` float32 image in [0, 1]."""
    width, height = canvas
    colors = {**BASE_COLORS, **(params.colors or {})}
    img = background_texture(width, height, params.texture_seed, colors["background"])
    pts = puppet_pose(params).points
    s = params.body_scale

    for i, j, r, key in _LIMBS:
        draw_capsule(img, pts[i], pts[j], r * s, colors[key])
    draw_quad(img, [pts[11], pts[12], pts[24], pts[23]], colors["torso"])
    hc = head_center(params)
    draw_capsule(img, (pts[11] + pts[12]) / 2, hc, 0.1 * s, colors["head"])
    draw_disc(img, hc, HEAD_RADIUS * s, colors["head"])
    for k in (2, 5):
        draw_disc(img, pts[k], 0.045 * s, colors["face"])
    draw_disc(img, pts[0], 0.03 * s, colors["face"])
    draw_capsule(img, pts[9], pts[10], 0.025 * s, colors["face"])
    for i, j, r, key in _ARMS:
        draw_capsule(img, pts[i], pts[j], r * s, colors[key])
    for side in (0, 1):
        knuckles = pts[[17 + side, 19 + side, 21 + side]]
        draw_disc(img, knuckles.mean(axis=0), 0.09 * s, colors["hand"])
        for k in knuckles:
            draw_disc(img, k, 0.035 * s, colors["hand"])
    return img
