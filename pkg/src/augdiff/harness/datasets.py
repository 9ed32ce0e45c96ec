"""Desk-scale synthetic-shape dataset.

Ten 28x28 grayscale pattern classes rendered procedurally with substantial
intra-class variation (position, size, intensity, stripe period, noise), so
a handful of examples genuinely undersamples a class. Fully deterministic
from the seed; no downloads.
"""

from __future__ import annotations

import numpy as np

from ..datamodel import ImageSample, LabeledDataset, quantize01
from ..errors import ConfigError, DataError
from ..seeding import np_rng

DESK_CLASS_NAMES = (
    "disk",
    "ring",
    "square",
    "box",
    "plus",
    "cross",
    "hstripes",
    "vstripes",
    "triangle",
    "checker",
)

SIDE = 28


def _render_shape(label, rng):
    cy = 13.5 + rng.uniform(-3.5, 3.5)
    cx = 13.5 + rng.uniform(-3.5, 3.5)
    radius = rng.uniform(5.0, 10.5)
    fg = rng.uniform(0.5, 0.95)
    bg = rng.uniform(0.02, 0.18)
    noise_sd = rng.uniform(0.01, 0.035)
    thickness = rng.uniform(1.2, 2.8)
    period = rng.uniform(2.8, 5.5)
    phase = rng.uniform(0.0, period)
    # rotation stays within +-20 deg so 45-deg-separated classes remain distinct
    angle = rng.uniform(-0.35, 0.35)

    yy, xx = np.mgrid[0:SIDE, 0:SIDE].astype(np.float64)
    dy0 = yy - cy
    dx0 = xx - cx
    dy = np.cos(angle) * dy0 - np.sin(angle) * dx0
    dx = np.sin(angle) * dy0 + np.cos(angle) * dx0
    rr = np.hypot(dy, dx)
    cheb = np.maximum(np.abs(dy), np.abs(dx))

    if label == 0:  # disk
        mask = rr <= radius
    elif label == 1:  # ring
        mask = (rr <= radius) & (rr >= radius - 2.0 * thickness)
    elif label == 2:  # square
        mask = cheb <= radius * 0.82
    elif label == 3:  # box outline
        half = radius * 0.82
        mask = (cheb <= half) & (cheb >= half - thickness)
    elif label == 4:  # plus
        arm = radius
        mask = ((np.abs(dx) <= thickness) | (np.abs(dy) <= thickness)) & (cheb <= arm)
    elif label == 5:  # diagonal cross
        arm = radius
        diag = np.minimum(np.abs(dy - dx), np.abs(dy + dx)) / np.sqrt(2.0)
        mask = (diag <= thickness) & (rr <= arm * 1.2)
    elif label == 6:  # horizontal stripes
        stripes = ((dy + phase) % period) < period / 2.0
        mask = stripes & (cheb <= radius)
    elif label == 7:  # vertical stripes
        stripes = ((dx + phase) % period) < period / 2.0
        mask = stripes & (cheb <= radius)
    elif label == 8:  # upward triangle
        h = radius
        inside = (dy <= h * 0.6) & (dy >= -h * 0.6 + np.abs(dx) * 1.6)
        mask = inside
    elif label == 9:  # checkerboard
        cells = ((np.floor((dy + phase) / period) + np.floor((dx + phase) / period)) % 2) == 0
        mask = cells & (cheb <= radius)
    else:
        raise DataError(f"unknown desk class {label}")

    img = np.full((SIDE, SIDE), bg)
    img[mask] = fg
    img += rng.normal(0.0, noise_sd, size=img.shape)
    return quantize01(np.clip(img, 0.0, 1.0))[:, :, None]


def build_desk_dataset(seed=0, train_per_class=100, val_per_class=20, test_per_class=30):
    """The full (pre-subsampling) desk dataset with balanced splits."""
    samples = []
    for label in range(len(DESK_CLASS_NAMES)):
        for split, count in (("train", train_per_class), ("val", val_per_class),
                             ("test", test_per_class)):
            for index in range(count):
                rng = np_rng(seed, "desk", label, split, index)
                samples.append(
                    ImageSample(
                        sample_id=f"real-{label}-{split}-{index:04d}",
                        pixels=_render_shape(label, rng),
                        label=label,
                        split=split,
                    )
                )
    return LabeledDataset(tuple(samples), len(DESK_CLASS_NAMES), DESK_CLASS_NAMES)


DATASET_BUILDERS = {
    "desk-10class": build_desk_dataset,
}


def build_dataset(name, seed=0, **kwargs):
    if name not in DATASET_BUILDERS:
        raise ConfigError(
            f"unknown dataset {name!r}; available: {sorted(DATASET_BUILDERS)} "
            "(external benchmark datasets are not bundled)"
        )
    return DATASET_BUILDERS[name](seed=seed, **kwargs)
