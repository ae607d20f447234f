"""Heatmap + offset + regression pose network.

Three parts share one forward pass:

* an encoder of four stride-2 stages,
* a decoder that upsamples back to heatmap resolution (input / 4) with encoder
  skips and ends in the heatmap and offset heads,
* a regression encoder that reads decoder features only through
  ``stop_gradient`` and encoder features directly, ending in a linear layer
  that emits K (x, y) pairs and K visibility logits.

The heatmap and offset heads are training-only and can be stripped.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .. import tensorcore as tc
from ..tensorcore import Parameter, Tensor

HEATMAP_STRIDE = 4
ENCODER_STRIDE = 16
HEAD_PREFIXES = ("head_heatmap.", "head_offset.")


@dataclass
class LossWeights:
    heatmap: float = 1.0
    offset: float = 1.0
    regression: float = 100.0
    visibility: float = 1.0
    occluded: float = 3.0  # relative weight of label-0 points in the visibility BCE

    def __post_init__(self):
        if not self.occluded >= 1.0:
            raise ValueError("occluded weight must be >= 1")


@dataclass
class NetworkConfig:
    input_size: int = 64
    num_keypoints: int = 33
    base_channels: int = 16
    heatmap_sigma: float = 2.0
    loss_weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if isinstance(self.loss_weights, dict):
            self.loss_weights = LossWeights(**self.loss_weights)
        if self.input_size % ENCODER_STRIDE or self.input_size <= 0:
            raise ValueError(f"input_size must be a positive multiple of {ENCODER_STRIDE}")
        if self.num_keypoints < 1 or self.base_channels < 1:
            raise ValueError("num_keypoints and base_channels must be positive")
        if any(w < 0 for w in asdict(self.loss_weights).values()):
            raise ValueError("loss weights must be non-negative")

    @property
    def heatmap_size(self) -> int:
        return self.input_size // HEATMAP_STRIDE

    @property
    def channels(self) -> tuple[int, int, int, int]:
        b = self.base_channels
        return (b, 2 * b, 4 * b, 8 * b)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown network config keys: {sorted(unknown)}")
        return cls(**d)


PRESETS = {
    "full-toy": NetworkConfig(base_channels=16),
    "lite-toy": NetworkConfig(base_channels=8),
}


def preset(name: str, **overrides) -> NetworkConfig:
    try:
        return replace(PRESETS[name], loss_weights=LossWeights(), **overrides)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class NetworkOutputs:
    coords: Tensor  # (N, K, 2) via reshape of raw, see ``coords_array``
    visibility_logits: Tensor  # (N, K)
    heatmaps: Tensor | None = None  # (N, K, H, H) logits
    offsets: Tensor | None = None  # (N, 2K, H, H)
    raw: Tensor | None = None


def _layer_specs(cfg: NetworkConfig) -> list[tuple[str, tuple[int, ...]]]:
    c1, c2, c3, c4 = cfg.channels
    k = cfg.num_keypoints
    flat = c4 * (cfg.input_size // ENCODER_STRIDE) ** 2
    return [
        ("enc1a", (c1, 3, 3, 3)),
        ("enc1b", (c1, c1, 3, 3)),
        ("enc2a", (c2, c1, 3, 3)),
        ("enc2b", (c2, c2, 3, 3)),
        ("enc3a", (c3, c2, 3, 3)),
        ("enc3b", (c3, c3, 3, 3)),
        ("enc4a", (c4, c3, 3, 3)),
        ("enc4b", (c4, c4, 3, 3)),
        ("dec3_up", (c3, c4, 1, 1)),
        ("dec3", (c3, c3, 3, 3)),
        ("dec2_up", (c2, c3, 1, 1)),
        ("dec2", (c2, c2, 3, 3)),
        ("head_heatmap", (k, c2, 1, 1)),
        ("head_offset", (2 * k, c2, 1, 1)),
        ("reg2", (c3, 2 * c2, 3, 3)),
        ("reg3", (c4, 3 * c3, 3, 3)),
        ("reg4", (c4, 2 * c4, 3, 3)),
        ("reg_out", (3 * k, flat)),
    ]


def init_parameters(cfg: NetworkConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """He-normal weights, zero biases.  The output layer starts at zero so an
    untrained network predicts the crop centre with visibility 0.5."""
    params: dict[str, np.ndarray] = {}
    for name, shape in _layer_specs(cfg):
        fan_in = int(np.prod(shape[1:]))
        if name == "reg_out":
            w = np.zeros(shape)
        elif name.startswith("head_"):
            w = rng.normal(0.0, math.sqrt(1.0 / fan_in), size=shape)
        else:
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
        params[f"{name}.weight"] = w.astype(np.float32)
        params[f"{name}.bias"] = np.zeros(shape[0], dtype=np.float32)
    # heatmap logits start low: most target cells are near zero
    params["head_heatmap.bias"][:] = -4.0
    return params


class PoseNet:
    def __init__(self, config: NetworkConfig, params: dict[str, np.ndarray], with_heads: bool = True):
        self.config = config
        self.with_heads = with_heads
        self.params: dict[str, Parameter] = {
            name: Parameter(np.array(value), name=name) for name, value in params.items()
        }
        expected = {n for n, _ in self._specs()}
        missing = {n.rsplit(".", 1)[0] for n in self.params} ^ expected
        if missing:
            raise ValueError(f"parameter set does not match config: {sorted(missing)}")

    def _specs(self):
        specs = _layer_specs(self.config)
        if not self.with_heads:
            specs = [s for s in specs if not s[0].startswith("head_")]
        return specs

    @classmethod
    def create(cls, config: NetworkConfig, seed: int = 0) -> "PoseNet":
        return cls(config, init_parameters(config, np.random.default_rng(seed)))

    @property
    def dtype(self):
        return next(iter(self.params.values())).data.dtype

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def named_parameters(self):
        return list(self.params.items())

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}

    def astype(self, dtype) -> "PoseNet":
        return PoseNet(
            self.config,
            {k: v.astype(dtype) for k, v in self.state_dict().items()},
            self.with_heads,
        )

    def copy(self) -> "PoseNet":
        return self.astype(self.dtype)

    def heatmap_branch_parameters(self) -> list[Parameter]:
        """Decoder and head parameters: the part supervised by heatmaps only."""
        return [p for n, p in self.params.items() if n.startswith(("dec", "head_"))]

    def regression_parameters(self) -> list[Parameter]:
        return [p for n, p in self.params.items() if n.startswith("reg")]

    def _conv(self, name, x, stride=1, act=True):
        y = tc.conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"], stride=stride)
        return tc.relu(y) if act else y

    def forward(self, images, heads: bool | None = None) -> NetworkOutputs:
        """``images``: (N, 3, S, S) array or Tensor with values in [0, 1]."""
        heads = self.with_heads if heads is None else heads
        if heads and not self.with_heads:
            raise ValueError("this model has no heatmap/offset heads")
        x = images if isinstance(images, Tensor) else Tensor(np.asarray(images))
        s = self.config.input_size
        if x.data.ndim != 4 or x.shape[1:] != (3, s, s):
            raise ValueError(f"expected input of shape (N, 3, {s}, {s}), got {x.shape}")
        x = tc.add(x, np.asarray(-0.5, dtype=x.dtype))

        e1 = self._conv("enc1b", self._conv("enc1a", x, stride=2))
        e2 = self._conv("enc2b", self._conv("enc2a", e1, stride=2))
        e3 = self._conv("enc3b", self._conv("enc3a", e2, stride=2))
        e4 = self._conv("enc4b", self._conv("enc4a", e3, stride=2))

        d3 = tc.relu(tc.add(self._conv("dec3_up", tc.upsample2x_nearest(e4), act=False), e3))
        d3 = self._conv("dec3", d3)
        d2 = tc.relu(tc.add(self._conv("dec2_up", tc.upsample2x_nearest(d3), act=False), e2))
        d2 = self._conv("dec2", d2)

        r = self._conv("reg2", tc.concat_channels([tc.stop_gradient(d2), e2]), stride=2)
        r = self._conv("reg3", tc.concat_channels([r, tc.stop_gradient(d3), e3]), stride=2)
        r = self._conv("reg4", tc.concat_channels([r, e4]))
        raw = tc.linear(tc.flatten(r), self.params["reg_out.weight"], self.params["reg_out.bias"])

        k = self.config.num_keypoints
        coords = tc.add(tc.slice_features(raw, 0, 2 * k), np.asarray(0.5, dtype=raw.dtype))
        vis = tc.slice_features(raw, 2 * k, 3 * k)
        out = NetworkOutputs(coords=coords, visibility_logits=vis, raw=raw)
        if heads:
            out.heatmaps = self._conv("head_heatmap", d2, act=False)
            out.offsets = self._conv("head_offset", d2, act=False)
        return out

    __call__ = forward


def strip_heatmap_head(model: PoseNet) -> PoseNet:
    """Inference copy without the heatmap and offset heads."""
    kept = {n: v.copy() for n, v in model.state_dict().items() if not n.startswith(HEAD_PREFIXES)}
    return PoseNet(model.config, kept, with_heads=False)


def config_from_state(state: dict[str, np.ndarray]) -> tuple[NetworkConfig, bool]:
    """Recover the architecture from parameter shapes."""
    try:
        base = state["enc1a.weight"].shape[0]
        out_dim, flat = state["reg_out.weight"].shape
    except KeyError as exc:
        raise ValueError(f"checkpoint lacks parameter {exc}") from None
    k = out_dim // 3
    side = math.isqrt(flat // (8 * base))
    with_heads = "head_heatmap.weight" in state
    return NetworkConfig(input_size=side * ENCODER_STRIDE, num_keypoints=k, base_channels=base), with_heads


def save_model(model: PoseNet, path) -> None:
    tc.save_checkpoint(path, model.state_dict())


def load_model(path, config: NetworkConfig | None = None) -> PoseNet:
    state = tc.load_checkpoint(path)
    inferred, with_heads = config_from_state(state)
    if config is not None:
        inferred = replace(config, input_size=inferred.input_size,
                           num_keypoints=inferred.num_keypoints,
                           base_channels=inferred.base_channels)
    return PoseNet(inferred, state, with_heads=with_heads)
