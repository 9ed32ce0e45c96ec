"""Training and guided sampling for the conditional denoising generator.

The denoiser is trained on (image, own-embedding, class) triples with the
standard noise-prediction objective; a per-example Bernoulli swaps the
conditioning for a learned null vector so the same network supports
classifier-free guidance at sampling time. Sampling is ancestral over an
evenly respaced timestep subsequence, with per-image noise streams so each
generated image is a pure function of its own seed regardless of how
requests are batched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch

from ..datamodel import ImageSample, Provenance, quantize01
from ..errors import TrainingError, UntrainedModelError
from ..nets import CondDenoiser, stack_pixels, to_pixels, to_tensor
from ..seeding import derive_seed, np_rng, torch_generator
from .schedule import diffuse


@dataclass(frozen=True)
class DenoiserConfig:
    """Denoiser architecture and conditioning-dropout settings."""

    image_shape: tuple[int, int, int] = (28, 28, 1)
    embed_dim: int = 64
    time_dim: int = 64
    widths: tuple[int, ...] = (32, 64, 96)
    null_prob: float = 0.1
    num_classes: int = 10

    def __post_init__(self):
        if any(v <= 0 for v in self.image_shape) or self.embed_dim <= 0 or self.time_dim <= 0:
            raise ValueError("dimensions must be positive")
        if not 0.0 <= self.null_prob <= 1.0:
            raise ValueError("null_prob must lie in [0, 1]")


@dataclass(frozen=True)
class GenerationConfig:
    """One sampling request: guidance scale, step count, seed, batch size."""

    cfg_scale: float = 2.0
    steps: int = 30
    seed: int = 0
    batch: int = 1

    def __post_init__(self):
        if self.cfg_scale < 0:
            raise ValueError("cfg_scale must be >= 0")
        if self.steps < 1 or self.batch < 1:
            raise ValueError("steps and batch must be positive")


def slot_seeds(cfg):
    """Per-image generation seeds for one request.

    A single-image request uses cfg.seed directly, so generating image i of
    a batch again via a batch=1 request with its provenance seed reproduces
    it bit-for-bit.
    """
    if cfg.batch == 1:
        return [int(cfg.seed)]
    return [derive_seed(cfg.seed, "slot", i) for i in range(cfg.batch)]


class GeneratorInterface:
    """Anything that turns conditioning bundles into synthetic samples."""

    def generate(self, bundle, cfg):
        raise NotImplementedError

    def generate_each(self, bundles, cfg, seeds):
        """One image per (bundle, seed) pair; default is a per-item loop."""
        if len(bundles) != len(seeds):
            raise ValueError("bundles and seeds must align")
        out = []
        for bundle, seed in zip(bundles, seeds):
            out.extend(self.generate(bundle, replace(cfg, seed=int(seed), batch=1)))
        return out


def guided_noise_prediction(denoiser, x, t, cond, scale):
    """Classifier-free guided noise estimate.

    scale 1 is exactly the conditional prediction and scale 0 exactly the
    unconditional one (the redundant forward pass is skipped); otherwise
    uncond + scale * (cond - uncond).
    """
    if scale == 1.0:
        return denoiser(x, t, cond)
    null = denoiser.null_conditioning(x.shape[0])
    if scale == 0.0:
        return denoiser(x, t, null)
    eps_cond = denoiser(x, t, cond)
    eps_uncond = denoiser(x, t, null)
    return eps_uncond + scale * (eps_cond - eps_uncond)


class DiffusionGenerator(GeneratorInterface):
    """Trained denoiser + schedule, exposing deterministic guided sampling."""

    def __init__(self, denoiser, schedule, config, encoder_id, trained=False):
        self.denoiser = denoiser
        self.denoiser.eval()
        self.schedule = schedule
        self.config = config
        self.encoder_id = encoder_id
        self.trained = trained

    def _check(self, bundle, cfg):
        if not self.trained:
            raise UntrainedModelError("generator has not been trained")
        if bundle.image_embedding.encoder_id != self.encoder_id:
            raise ValueError(
                f"bundle encoded with {bundle.image_embedding.encoder_id!r}, "
                f"generator expects {self.encoder_id!r}"
            )
        if cfg.steps > self.schedule.num_steps:
            raise ValueError(
                f"steps {cfg.steps} exceeds schedule length {self.schedule.num_steps}"
            )

    def sample_pixels(self, embeddings, labels, seeds, cfg_scale, steps):
        """Batched guided sampling; image i is a pure function of seeds[i].

        Returns (N, H, W, C) float32 pixels in [0, 1] on the storage grid.
        """
        n = len(seeds)
        h, w, c = self.denoiser.image_shape
        ts = self.schedule.sampling_timesteps(steps)
        noises = torch.stack(
            [
                torch.randn((len(ts) + 1, c, h, w), generator=torch_generator(int(s)))
                for s in seeds
            ]
        )
        emb = torch.as_tensor(np.asarray(embeddings, dtype=np.float32))
        lab = torch.as_tensor(np.asarray(labels, dtype=np.int64))
        cumprod = torch.as_tensor(self.schedule.alphas_cumprod.copy(), dtype=torch.float32)

        with torch.no_grad():
            cond = self.denoiser.conditioning(emb, lab)
            x = noises[:, 0]
            for i, t in enumerate(ts):
                a_t = cumprod[t]
                a_prev = cumprod[ts[i + 1]] if i + 1 < len(ts) else torch.tensor(1.0)
                t_batch = torch.full((n,), int(t), dtype=torch.long)
                eps = guided_noise_prediction(self.denoiser, x, t_batch, cond, cfg_scale)
                x0 = ((x - (1.0 - a_t).sqrt() * eps) / a_t.sqrt()).clamp(-1.0, 1.0)
                if i + 1 < len(ts):
                    beta_eff = 1.0 - a_t / a_prev
                    mean = (
                        a_prev.sqrt() * beta_eff / (1.0 - a_t) * x0
                        + (a_t / a_prev).sqrt() * (1.0 - a_prev) / (1.0 - a_t) * x
                    )
                    var = beta_eff * (1.0 - a_prev) / (1.0 - a_t)
                    x = mean + var.sqrt() * noises[:, i + 1]
                else:
                    x = x0
        return quantize01(to_pixels(x))

    def generate(self, bundle, cfg):
        """GeneratorInterface: cfg.batch images with full synthetic provenance."""
        self._check(bundle, cfg)
        seeds = slot_seeds(cfg)
        return self._package(
            self.sample_pixels(
                np.tile(bundle.image_embedding.values, (cfg.batch, 1)),
                [bundle.class_label] * cfg.batch,
                seeds,
                cfg.cfg_scale,
                cfg.steps,
            ),
            [bundle] * cfg.batch,
            seeds,
            cfg,
        )

    def generate_each(self, bundles, cfg, seeds):
        for bundle in bundles:
            self._check(bundle, cfg)
        pixels = self.sample_pixels(
            np.stack([b.image_embedding.values for b in bundles]),
            [b.class_label for b in bundles],
            seeds,
            cfg.cfg_scale,
            cfg.steps,
        )
        return self._package(pixels, bundles, seeds, cfg)

    @staticmethod
    def _package(pixels, bundles, seeds, cfg):
        out = []
        for px, bundle, seed in zip(pixels, bundles, seeds):
            prov = Provenance(
                origin="synthetic",
                method=bundle.method,
                cfg_scale=cfg.cfg_scale,
                seed=int(seed),
                source_ids=bundle.source_ids,
            )
            out.append(
                ImageSample(
                    sample_id=f"synth-{bundle.class_label}-{seed:016x}",
                    pixels=px,
                    label=bundle.class_label,
                    split="train",
                    provenance=prov,
                )
            )
        return out


def sample_cfg(generator, bundle, cfg):
    """Guided reverse diffusion for one bundle; batch images, deterministic."""
    return generator.generate(bundle, cfg)


def train_generator(ds, encoder, denoiser_cfg, schedule, epochs, seed=0,
                    lr=2e-3, batch_size=64):
    """Fit the denoiser on the train split; returns (generator, history).

    Each example is conditioned on its own embedding and class; with
    probability ``null_prob`` the fused conditioning is swapped for the
    learned null vector so sampling can form unconditional predictions.
    """
    train = ds.restrict(split="train").samples
    if not train:
        raise TrainingError("no training samples for the generator")
    for k in range(ds.num_classes):
        if not any(s.label == k for s in train):
            raise TrainingError(f"class {k} has no training images")

    pixels = to_tensor(stack_pixels(train))
    labels = torch.as_tensor(np.array([s.label for s in train], dtype=np.int64))
    embeddings = torch.as_tensor(encoder.encode_samples(train))

    torch.manual_seed(derive_seed(seed, "generator-init"))
    denoiser = CondDenoiser(
        image_shape=denoiser_cfg.image_shape,
        embed_dim=denoiser_cfg.embed_dim,
        time_dim=denoiser_cfg.time_dim,
        widths=denoiser_cfg.widths,
        num_classes=denoiser_cfg.num_classes,
    )
    opt = torch.optim.Adam(denoiser.parameters(), lr=lr)
    shuffle = np_rng(seed, "generator-shuffle")
    draws = torch_generator(seed, "generator-noise")

    epoch_loss = []
    null_swaps = 0
    examples_seen = 0
    denoiser.train()
    for epoch in range(epochs):
        order = shuffle.permutation(len(train))
        losses = []
        for start in range(0, len(train), batch_size):
            idx = torch.as_tensor(order[start : start + batch_size].copy())
            x0 = pixels[idx]
            t = torch.randint(0, schedule.num_steps, (len(idx),), generator=draws)
            noise = torch.randn(x0.shape, generator=draws)
            x_t = diffuse(schedule, x0, t, noise)

            cond = denoiser.conditioning(embeddings[idx], labels[idx])
            null_mask = torch.rand(len(idx), generator=draws) < denoiser_cfg.null_prob
            cond = torch.where(
                null_mask[:, None], denoiser.null_conditioning(len(idx)), cond
            )
            null_swaps += int(null_mask.sum())
            examples_seen += len(idx)

            loss = torch.nn.functional.mse_loss(denoiser(x_t, t, cond), noise)
            if not torch.isfinite(loss):
                raise TrainingError(f"generator loss diverged at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        epoch_loss.append(float(np.mean(losses)))
    denoiser.eval()

    history = {
        "epoch_loss": epoch_loss,
        "null_fraction": null_swaps / max(examples_seen, 1),
        "examples_seen": examples_seen,
    }
    generator = DiffusionGenerator(
        denoiser, schedule, denoiser_cfg, encoder.encoder_id, trained=True
    )
    return generator, history
