"""Run configuration: one JSON document, unknown keys rejected."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .evaluation import EvalConfig
from .posenet.network import LossWeights, NetworkConfig
from .posenet.training import TrainConfig
from .synthdata.augment import OcclusionConfig
from .synthdata.dataset import SynthConfig
from .topology import COCO17, FULL33
from .tracker import TrackerConfig

SUBSETS = {"coco17": COCO17, "full33": FULL33}


class ConfigError(ValueError):
    pass


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")


def _build(cls, section: str, data: dict, nested: dict | None = None):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    names = [f.name for f in fields(cls)]
    _check_keys(section, data, names)
    kwargs = dict(data)
    for key, sub in (nested or {}).items():
        if key in kwargs:
            kwargs[key] = _build(sub, f"{section}.{key}", kwargs[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


@dataclass
class RunConfig:
    seed: int = 0
    paths: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def network_config(self, base: NetworkConfig) -> NetworkConfig:
        data = {**base.to_dict(), **self.network}
        if "loss_weights" in self.network:
            data["loss_weights"] = {**base.to_dict()["loss_weights"], **self.network["loss_weights"]}
        return _build(NetworkConfig, "network", data, {"loss_weights": LossWeights})


PATH_KEYS = {"data", "checkpoint", "output"}


def parse_run_config(data: dict) -> RunConfig:
    _check_keys("config", data, [f.name for f in fields(RunConfig)])
    cfg = RunConfig()
    if "seed" in data:
        cfg.seed = int(data["seed"])
    paths = data.get("paths", {})
    _check_keys("paths", paths, PATH_KEYS)
    cfg.paths = dict(paths)
    network = data.get("network", {})
    _check_keys("network", network, [f.name for f in fields(NetworkConfig)])
    if "loss_weights" in network:
        _check_keys("network.loss_weights", network["loss_weights"], [f.name for f in fields(LossWeights)])
    cfg.network = dict(network)
    if "train" in data:
        cfg.train = _build(TrainConfig, "train", data["train"], {"occlusion": OcclusionConfig})
    if "tracker" in data:
        cfg.tracker = _build(TrackerConfig, "tracker", data["tracker"])
    if "eval" in data:
        ev = dict(data["eval"])
        _check_keys("eval", ev, ["tolerance", "subset", "invisible"])
        if "subset" in ev:
            try:
                ev["subset"] = SUBSETS[ev["subset"]]
            except KeyError:
                raise ConfigError(f"eval.subset must be one of {sorted(SUBSETS)}") from None
        cfg.eval = _build(EvalConfig, "eval", ev)
    if "synth" in data:
        cfg.synth = _build(SynthConfig, "synth", data["synth"], {"occlusion": OcclusionConfig})
    return cfg


def load_run_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return parse_run_config(data)
