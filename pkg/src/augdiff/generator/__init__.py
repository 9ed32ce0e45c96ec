"""Desk-scale conditional diffusion generator with classifier-free guidance."""

from .schedule import NoiseSchedule, linear_schedule
from .encoder import ImageEncoder, train_encoder
from .diffusion import (
    DenoiserConfig,
    DiffusionGenerator,
    GenerationConfig,
    GeneratorInterface,
    guided_noise_prediction,
    sample_cfg,
    train_generator,
)
from .external import ExternalGenerator

__all__ = [
    "NoiseSchedule",
    "linear_schedule",
    "ImageEncoder",
    "train_encoder",
    "DenoiserConfig",
    "GenerationConfig",
    "GeneratorInterface",
    "DiffusionGenerator",
    "ExternalGenerator",
    "guided_noise_prediction",
    "sample_cfg",
    "train_generator",
]
