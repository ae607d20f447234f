"""Synthetic articulated-puppet data: sampling, rendering, augmentation, I/O."""

from .augment import (
    OcclusionConfig,
    Rect,
    TrainingSample,
    crop_image,
    crop_sample,
    draw_rects,
    occlude,
    sample_bilinear,
    sample_rects,
    visibility_from_rects,
)
from .dataset import (
    MANIFEST_NAME,
    LoadedSample,
    SynthConfig,
    clip_frames,
    generate_clip,
    generate_dataset,
    in_canvas,
    load_samples,
    make_sample,
    manifest_path,
    upper_body_count,
)
from .io import Record, read_manifest, read_ppm, write_manifest, write_ppm
from .puppet import PuppetParams, puppet_pose, sample_puppet
from .render import render_puppet
