"""Dataset and clip generation on disk."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import Pose, pose_to_roi
from .augment import OcclusionConfig, occlude
from .io import Record, read_manifest, read_ppm, resolve_image, write_manifest, write_ppm
from .puppet import (
    PuppetParams,
    extent_margin,
    puppet_pose,
    sample_articulation,
    sample_colors,
    sample_puppet,
)
from .render import render_puppet

MANIFEST_NAME = "manifest.jsonl"


@dataclass
class SynthConfig:
    canvas: int = 128
    upper_body_fraction: float = 0.2
    scale_min: float = 18.0
    scale_max: float = 26.0
    occlusion: OcclusionConfig = field(default_factory=OcclusionConfig)


def in_canvas(points: np.ndarray, width: int, height: int) -> np.ndarray:
    return (points[:, 0] >= 0) & (points[:, 0] < width) & (points[:, 1] >= 0) & (points[:, 1] < height)


def make_sample(index: int, seed: int, config: SynthConfig) -> tuple[np.ndarray, Pose]:
    rng = np.random.default_rng([seed, index])
    upper = bool(rng.random() < config.upper_body_fraction)
    canvas = (config.canvas, config.canvas)
    params, pose = sample_puppet(rng, canvas, (config.scale_min, config.scale_max), upper_body=upper)
    image = render_puppet(params, canvas)
    ref = pose_to_roi(pose).side
    image, visible, _ = occlude(image, pose, rng, config.occlusion, ref_side=ref)
    visible *= in_canvas(pose.points, *canvas)
    return image, Pose(pose.points, visible)


def _write_one(args):
    index, seed, config, out_dir = args
    image, pose = make_sample(index, seed, config)
    name = f"images/{index:06d}.ppm"
    write_ppm(Path(out_dir) / name, image)
    return Record(name, pose)


def generate_dataset(
    n: int, seed: int, out_dir, config: SynthConfig | None = None, workers: int = 1
) -> list[Record]:
    """Render ``n`` samples to ``out_dir/images`` and write ``manifest.jsonl``.

    Sample ``i`` draws from its own stream seeded by ``(seed, i)``, so the
    output does not depend on ``workers``.
    """
    if n <= 0:
        raise ValueError("dataset size must be positive")
    config = config or SynthConfig()
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    jobs = [(i, seed, config, str(out)) for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_write_one, jobs, chunksize=16))
    else:
        records = [_write_one(j) for j in jobs]
    write_manifest(out / MANIFEST_NAME, records)
    return records


def _smooth(t: float) -> float:
    return t * t * (3 - 2 * t)


def _lerp_art(a: dict, b: dict, t: float) -> dict:
    out = {}
    for key, va in a.items():
        vb = b[key]
        if isinstance(va, tuple):
            out[key] = tuple((1 - t) * x + t * y for x, y in zip(va, vb))
        else:
            out[key] = (1 - t) * va + t * vb
    return out


def clip_frames(n_frames: int, seed: int, canvas: int = 128, keyframe_every: int = 12, scale: float = 22.0):
    """Yield ``(params, pose)`` for a smoothly moving puppet."""
    rng = np.random.default_rng([seed, 10**6])
    n_keys = n_frames // keyframe_every + 2
    keys = [sample_articulation(rng) for _ in range(n_keys)]
    colors = sample_colors(rng)
    texture = int(rng.integers(2**31))
    pos = np.array([canvas / 2, canvas / 2 + 0.2 * scale])
    vel = rng.uniform(-0.6, 0.6, size=2)
    for f in range(n_frames):
        k, r = divmod(f, keyframe_every)
        art = _lerp_art(keys[k], keys[k + 1], _smooth(r / keyframe_every))
        params = PuppetParams(0.0, 0.0, scale, colors=colors, texture_seed=texture, **art)
        pts = puppet_pose(params).points
        m = extent_margin(scale)
        lo = -(pts.min(axis=0) - m)
        hi = canvas - (pts.max(axis=0) + m)
        vel += rng.normal(0, 0.1, size=2)
        vel = np.clip(vel, -0.8, 0.8)
        pos = pos + vel
        clamped = np.clip(pos, lo, np.maximum(hi, lo))
        vel[clamped != pos] *= -1
        pos = clamped
        params.root_x, params.root_y = float(pos[0]), float(pos[1])
        yield params, puppet_pose(params)


def generate_clip(
    n_frames: int,
    seed: int,
    out_dir,
    canvas: int = 128,
    occlusion: OcclusionConfig | None = None,
) -> list[Record]:
    """Render a clip; manifest order is frame order."""
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    occlusion = occlusion or OcclusionConfig(max_rects=0)
    rng = np.random.default_rng([seed, 2 * 10**6])
    records = []
    for f, (params, pose) in enumerate(clip_frames(n_frames, seed, canvas)):
        image = render_puppet(params, (canvas, canvas))
        image, visible, _ = occlude(image, pose, rng, occlusion, ref_side=pose_to_roi(pose).side)
        visible *= in_canvas(pose.points, canvas, canvas)
        name = f"frames/{f:05d}.ppm"
        write_ppm(out / name, image)
        records.append(Record(name, Pose(pose.points, visible)))
    write_manifest(out / MANIFEST_NAME, records)
    return records


@dataclass
class LoadedSample:
    image: np.ndarray  # (H, W, 3) float32
    pose: Pose


def load_samples(manifest_path) -> list[LoadedSample]:
    records = read_manifest(manifest_path)
    return [LoadedSample(read_ppm(resolve_image(manifest_path, r)), r.pose) for r in records]


def manifest_path(path) -> Path:
    """Accept either a manifest file or a directory containing one."""
    p = Path(path)
    return p / MANIFEST_NAME if p.is_dir() else p


def upper_body_count(records, width: int, height: int) -> int:
    legs = slice(25, 33)
    return sum(
        int(not np.all(in_canvas(r.pose.points[legs], width, height))) for r in records
    )


__all__ = [
    "LoadedSample",
    "MANIFEST_NAME",
    "SynthConfig",
    "clip_frames",
    "generate_clip",
    "generate_dataset",
    "in_canvas",
    "load_samples",
    "make_sample",
    "manifest_path",
    "upper_body_count",
]

