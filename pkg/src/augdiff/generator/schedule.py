"""Forward-process noise schedule for the denoising generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-step noise rates with the derived cumulative signal fractions."""

    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise ValueError("betas must be a non-empty 1-D array")
        if betas[0] <= 0.0 or betas[-1] >= 1.0 or np.any(np.diff(betas) < 0):
            raise ValueError("betas must be increasing within (0, 1)")
        betas = betas.copy()
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        alphas = 1.0 - betas
        cumprod = np.cumprod(alphas)
        if np.any(np.diff(cumprod) >= 0):
            raise ValueError("cumulative signal fraction must be strictly decreasing")
        alphas.setflags(write=False)
        cumprod.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alphas_cumprod", cumprod)

    @property
    def num_steps(self):
        return int(self.betas.shape[0])

    def sampling_timesteps(self, steps):
        """Evenly spaced timestep subsequence (descending) for sampling."""
        if steps < 1:
            raise ValueError("steps must be >= 1")
        if steps > self.num_steps:
            raise ValueError(f"steps {steps} exceeds schedule length {self.num_steps}")
        ts = np.unique(np.round(np.linspace(0, self.num_steps - 1, steps)).astype(np.int64))
        return ts[::-1].copy()


def linear_schedule(num_steps=200, beta_start=1e-4, beta_end=0.02):
    """Linearly spaced noise rates, the standard default."""
    return NoiseSchedule(np.linspace(beta_start, beta_end, num_steps))


def diffuse(schedule, x0, t, noise):
    """Forward process: x_t = sqrt(acum_t) x0 + sqrt(1 - acum_t) noise.

    Works on torch tensors; ``t`` is a per-sample integer tensor.
    """
    import torch

    cumprod = torch.as_tensor(
        schedule.alphas_cumprod.copy(), dtype=x0.dtype, device=x0.device
    )
    shape = (-1,) + (1,) * (x0.ndim - 1)
    signal = cumprod[t].sqrt().reshape(shape)
    spread = (1.0 - cumprod[t]).sqrt().reshape(shape)
    return signal * x0 + spread * noise
