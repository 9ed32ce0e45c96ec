"""On-disk artifacts handed between CLI stages: generator checkpoints.

One file carries the denoiser, the encoder, and the schedule so downstream
stages (generate, eval, fid) can rebuild everything without retraining.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from ..generator import DiffusionGenerator, ImageEncoder
from ..generator.diffusion import DenoiserConfig
from ..generator.schedule import NoiseSchedule
from ..nets import CondDenoiser, SmallConvClassifier


def save_generator_checkpoint(generator, encoder, path, history=None, seed=None):
    payload = {
        "denoiser_state": generator.denoiser.state_dict(),
        "denoiser_cfg": asdict(generator.config),
        "betas": np.asarray(generator.schedule.betas).tolist(),
        "encoder_state": encoder.net.state_dict(),
        "encoder_arch": {
            "image_shape": encoder.net.image_shape,
            "num_classes": encoder.net.num_classes,
            "embed_dim": encoder.net.embed_dim,
            "width": encoder.net.conv[0].out_channels,
        },
        "history": history,
        "seed": seed,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    return path


def load_generator_checkpoint(path):
    """Returns (DiffusionGenerator, ImageEncoder, payload)."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    arch = payload["encoder_arch"]
    enc_net = SmallConvClassifier(
        tuple(arch["image_shape"]), arch["num_classes"],
        embed_dim=arch["embed_dim"], width=arch["width"],
    )
    enc_net.load_state_dict(payload["encoder_state"])
    encoder = ImageEncoder(enc_net, trained=True)

    cfg_doc = dict(payload["denoiser_cfg"])
    cfg_doc["image_shape"] = tuple(cfg_doc["image_shape"])
    cfg_doc["widths"] = tuple(cfg_doc["widths"])
    denoiser_cfg = DenoiserConfig(**cfg_doc)
    denoiser = CondDenoiser(
        image_shape=denoiser_cfg.image_shape,
        embed_dim=denoiser_cfg.embed_dim,
        time_dim=denoiser_cfg.time_dim,
        widths=denoiser_cfg.widths,
        num_classes=denoiser_cfg.num_classes,
    )
    denoiser.load_state_dict(payload["denoiser_state"])
    schedule = NoiseSchedule(np.asarray(payload["betas"], dtype=np.float64))
    generator = DiffusionGenerator(
        denoiser, schedule, denoiser_cfg, encoder.encoder_id, trained=True
    )
    return generator, encoder, payload
