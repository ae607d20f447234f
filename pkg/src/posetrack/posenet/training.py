from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .. import tensorcore as tc
from ..evaluation import EvalConfig, evaluate_dataset
from ..geometry import DEFAULT_PADDING, Pose, jitter_roi, pose_to_roi
from ..synthdata.augment import OcclusionConfig, crop_image, draw_rects, sample_rects, visibility_from_rects
from ..geometry import image_to_crop_normalized
from .inference import AlignedPredictor
from .losses import total_loss
from .network import PoseNet
from .targets import batch_targets

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    lr: float = 2e-3
    final_lr_fraction: float = 0.05
    seed: int = 0
    padding: float = DEFAULT_PADDING
    jitter_scale: float = 0.10
    jitter_shift: float = 0.10
    occlusion: OcclusionConfig = field(default_factory=lambda: OcclusionConfig(max_rects=2))
    max_steps: int | None = None
    eval_every: int = 1

    def __post_init__(self):
        if isinstance(self.occlusion, dict):
            self.occlusion = OcclusionConfig(**self.occlusion)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    pck: float
    seconds: float


@dataclass
class TrainResult:
    model: PoseNet
    history: list[EpochStats]
    steps: int

    def loss_curve_csv(self) -> str:
        lines = ["epoch,loss,pck"]
        lines += [f"{h.epoch},{h.loss:.6f},{h.pck:.4f}" for h in self.history]
        return "\n".join(lines) + "\n"


def make_batch(samples, indices, config: TrainConfig, crop_size: int, rng: np.random.Generator):
    """Aligned, jittered and occluded crops with crop-normalized targets."""
    images, coords, labels = [], [], []
    for i in indices:
        s = samples[i]
        roi = pose_to_roi(s.pose, config.padding)
        if config.jitter_scale or config.jitter_shift:
            roi = jitter_roi(roi, rng, config.jitter_scale, config.jitter_shift)
        crop = crop_image(s.image, roi, crop_size)
        local = image_to_crop_normalized(s.pose, roi)
        vis = local.visibility.copy()
        if config.occlusion.max_rects > 0:
            rects = sample_rects(rng, crop_size, crop_size, config.occlusion)
            crop = draw_rects(crop, rects)
            vis *= visibility_from_rects(local.points * crop_size, rects)
        images.append(crop.transpose(2, 0, 1))
        coords.append(local.points)
        labels.append(vis)
    return (
        np.stack(images).astype(np.float32),
        np.stack(coords).astype(np.float32),
        np.stack(labels).astype(np.float32),
    )


def training_step(model: PoseNet, optimizer: tc.Adam, images, coords, labels) -> float:
    cfg = model.config
    weights = cfg.loss_weights
    use_heads = model.with_heads and (weights.heatmap > 0 or weights.offset > 0)
    out = model.forward(images, heads=use_heads)
    targets = batch_targets(coords, labels, cfg.heatmap_size, cfg.heatmap_sigma) if use_heads else None
    terms = total_loss(out, coords, labels, weights, targets)
    tc.backward(terms.total, optimizer.params)
    optimizer.step()
    return float(terms.total.data)


def _lr_at(step: int, total_steps: int, config: TrainConfig) -> float:
    if total_steps <= 1:
        return config.lr
    frac = step / (total_steps - 1)
    lo = config.lr * config.final_lr_fraction
    return lo + 0.5 * (config.lr - lo) * (1 + math.cos(math.pi * frac))


def train(
    model: PoseNet,
    samples: Sequence,
    config: TrainConfig,
    heldout: Sequence | None = None,
    eval_config: EvalConfig | None = None,
    progress: Callable[[EpochStats], None] | None = None,
) -> TrainResult:
    """Adam training with per-epoch ROI jitter and occlusion augmentation.

    ``samples`` and ``heldout`` hold objects with ``image`` (H, W, 3) and
    ``pose`` attributes.  Deterministic for a fixed ``config.seed``.  The
    model is updated in place and also returned.
    """
    if not samples:
        raise ValueError("training set is empty")
    n = len(samples)
    batch = min(config.batch_size, n)
    steps_per_epoch = max(n // batch, 1)
    total_steps = config.epochs * steps_per_epoch
    if config.max_steps is not None:
        total_steps = min(total_steps, config.max_steps)
    optimizer = tc.Adam(model.parameters(), lr=config.lr)
    history: list[EpochStats] = []
    step = 0
    epoch = 0
    while step < total_steps:
        epoch += 1
        t0 = time.perf_counter()
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(n)
        losses = []
        for b in range(steps_per_epoch):
            if step >= total_steps:
                break
            idx = order[b * batch : (b + 1) * batch]
            images, coords, labels = make_batch(samples, idx, config, model.config.input_size, rng)
            optimizer.lr = _lr_at(step, total_steps, config)
            losses.append(training_step(model, optimizer, images, coords, labels))
            step += 1
        pck = float("nan")
        last = step >= total_steps
        if heldout and (epoch % config.eval_every == 0 or last):
            pairs = [(s.image, s.pose) for s in heldout]
            pck = evaluate_dataset(AlignedPredictor(model, config.padding), pairs, eval_config).pck
        stats = EpochStats(epoch, float(np.mean(losses)), pck, time.perf_counter() - t0)
        history.append(stats)
        log.info("epoch %d loss %.5f heldout PCK %.2f (%.1fs)", epoch, stats.loss, stats.pck, stats.seconds)
        if progress is not None:
            progress(stats)
    return TrainResult(model, history, step)


def pose_pairs(samples) -> list[tuple[np.ndarray, Pose]]:
    return [(s.image, s.pose) for s in samples]
