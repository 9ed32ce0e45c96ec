"""Experiment configuration: named presets, YAML files, resolved snapshots.

A config file is versioned YAML that names a preset and optionally
overrides sections::

    version: 1
    preset: desk-10class
    generation:
      cfg_scale: 4.0

Every CLI run writes the fully resolved config (plus its hash) next to its
outputs before doing anything else, so results are reproducible from the
snapshot alone.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..augcond import AugmentationSpec
from ..curriculum import CategoryThresholds, FewShotSpec, LongTailProfile
from ..errors import ConfigError
from ..generator import DenoiserConfig, GenerationConfig
from ..trainer import FineTuneConfig, TrainConfig

CONFIG_VERSION = 1

# Desk-scale defaults: a 10-class 28x28 dataset with a long tail reaching
# down to 5 images, balanced to 100 per class.
_DESK = {
    "dataset": "desk-10class",
    "seed": 0,
    "longtail": {
        "target_counts": [100, 70, 50, 35, 25, 18, 12, 8, 5, 5],
        "min_count": 5,
        "max_count": 100,
    },
    "thresholds": {"many_min": 100, "few_max": 20},
    "balance_target": 100,
    "augmentation": {
        "method": "Embed-CutMix-Dropout",
        "beta_alpha": 1.0,
        "dropout_p": 0.4,
        "rng_seed": 0,
        "embed_patch_style": "contiguous",
    },
    "generation": {"cfg_scale": 2.0, "steps": 30, "seed": 0, "batch": 64},
    "schedule": {"num_steps": 200, "beta_start": 1e-4, "beta_end": 0.02},
    "denoiser": {
        "image_shape": [28, 28, 1],
        "embed_dim": 64,
        "time_dim": 64,
        "widths": [32, 64, 96],
        "null_prob": 0.1,
        "num_classes": 10,
    },
    "encoder": {"embed_dim": 64, "width": 32, "epochs": 12, "batch_size": 64, "lr": 2e-3},
    "generator_train": {"epochs": 150, "batch_size": 64, "lr": 2e-3},
    "train": {
        "epochs": 25,
        "batch": 64,
        "lr": 0.05,
        "momentum": 0.9,
        "weight_decay": 5e-4,
        "schedule": "cosine-anneal",
        "loss": "balanced-softmax",
        "real_fraction": 0.5,
    },
    "finetune": {"epochs": 10, "lr": 1e-4, "batch": 32, "trainable_scope": "last-layer"},
    "fewshot": {"shots": [1, 2, 4, 8, 16], "trials": 4},
    "fewshot_cfg_scale": 10.0,
}

# The benchmark-scale recipe as configuration: ImageNet-LT bounds and the
# published training hyperparameters. Not runnable here (the benchmark data
# and a pretrained billion-scale generator are not bundled); it documents
# the target setting and keeps the presets honest.
_PAPER = copy.deepcopy(_DESK)
_PAPER.update(
    {
        "dataset": "imagenet-lt",
        "longtail": {"target_counts": [], "min_count": 5, "max_count": 1280},
        "balance_target": 1280,
        "generation": {"cfg_scale": 2.0, "steps": 30, "seed": 0, "batch": 64},
        "train": {
            "epochs": 150,
            "batch": 512,
            "lr": 0.2,
            "momentum": 0.9,
            "weight_decay": 5e-4,
            "schedule": "cosine-anneal",
            "loss": "balanced-softmax",
            "real_fraction": 0.5,
        },
        "finetune": {"epochs": 50, "lr": 1e-4, "batch": 32, "trainable_scope": "last-layer"},
        "fewshot_cfg_scale": 10.0,
    }
)

PRESETS = {"desk-10class": _DESK, "imagenet-lt-paper": _PAPER}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment configuration."""

    raw: dict

    def __post_init__(self):
        object.__setattr__(self, "raw", copy.deepcopy(self.raw))

    @property
    def dataset(self):
        return self.raw["dataset"]

    @property
    def seed(self):
        return int(self.raw["seed"])

    def longtail_profile(self):
        sec = self.raw["longtail"]
        if not sec["target_counts"]:
            raise ConfigError(
                f"preset for dataset {self.dataset!r} has no explicit long-tail "
                "counts; provide target_counts"
            )
        return LongTailProfile(
            tuple(sec["target_counts"]), int(sec["min_count"]), int(sec["max_count"])
        )

    def thresholds(self):
        sec = self.raw["thresholds"]
        return CategoryThresholds(int(sec["many_min"]), int(sec["few_max"]))

    def augmentation(self, method=None, dropout_p=None):
        sec = dict(self.raw["augmentation"])
        if method is not None:
            sec["method"] = method
        if dropout_p is not None:
            sec["dropout_p"] = dropout_p
        return AugmentationSpec(**sec)

    def generation(self, cfg_scale=None, seed=None):
        sec = dict(self.raw["generation"])
        if cfg_scale is not None:
            sec["cfg_scale"] = cfg_scale
        if seed is not None:
            sec["seed"] = seed
        return GenerationConfig(**sec)

    def denoiser(self):
        sec = dict(self.raw["denoiser"])
        sec["image_shape"] = tuple(sec["image_shape"])
        sec["widths"] = tuple(sec["widths"])
        return DenoiserConfig(**sec)

    def schedule_params(self):
        return dict(self.raw["schedule"])

    def encoder_params(self):
        return dict(self.raw["encoder"])

    def generator_train_params(self):
        return dict(self.raw["generator_train"])

    def train(self):
        return TrainConfig(**self.raw["train"])

    def finetune(self):
        return FineTuneConfig(**self.raw["finetune"])

    def fewshot_specs(self):
        sec = self.raw["fewshot"]
        return [FewShotSpec(int(s), int(sec["trials"])) for s in sec["shots"]]

    @property
    def balance_target(self):
        return int(self.raw["balance_target"])


def _deep_merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(base[key], value, where)
        else:
            out[key] = value
    return out


def preset_config(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return ExperimentConfig(PRESETS[name])


def load_config(path):
    """Load a YAML config file: version + preset + section overrides."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    version = doc.pop("version", None)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")
    preset = doc.pop("preset", "desk-10class")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
    return ExperimentConfig(_deep_merge(PRESETS[preset], doc))


def config_hash(cfg):
    canon = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def write_snapshot(cfg, out_dir):
    """Write the resolved config and its hash; returns the snapshot path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot = {
        "version": CONFIG_VERSION,
        "config_hash": config_hash(cfg),
        "resolved": cfg.raw,
    }
    path = out_dir / "config.snapshot.yaml"
    path.write_text(yaml.safe_dump(snapshot, sort_keys=True), encoding="utf-8")
    return path
