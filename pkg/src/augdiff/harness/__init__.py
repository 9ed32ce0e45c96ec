"""Experiment orchestration: configs, campaigns, evaluation, sweeps, reports."""

from .config import ExperimentConfig, config_hash, load_config, preset_config
from .datasets import build_dataset, build_desk_dataset
from .metrics import CategoryAccuracy, fid_score, top1_by_category
from .campaign import run_generation_campaign
from .sweeps import run_cfg_sweep, run_dropout_sweep
from .report import EvalReport, emit_report

__all__ = [
    "ExperimentConfig",
    "config_hash",
    "load_config",
    "preset_config",
    "build_dataset",
    "build_desk_dataset",
    "CategoryAccuracy",
    "fid_score",
    "top1_by_category",
    "run_generation_campaign",
    "run_cfg_sweep",
    "run_dropout_sweep",
    "EvalReport",
    "emit_report",
]
