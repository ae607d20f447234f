from .network import (
    HEAD_PREFIXES,
    LossWeights,
    NetworkConfig,
    NetworkOutputs,
    PRESETS,
    PoseNet,
    config_from_state,
    load_model,
    preset,
    save_model,
    strip_heatmap_head,
)
from .targets import HeatmapTargets, batch_targets, decode_heatmap, heatmap_targets
from .losses import LossTerms, total_loss
from .inference import AlignedPredictor, infer, predict_in_roi
from .training import EpochStats, TrainConfig, TrainResult, make_batch, train, training_step
