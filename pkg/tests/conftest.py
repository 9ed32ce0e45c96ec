"""Shared fixtures: tiny in-memory datasets, a stub encoder, and a small
trained desk stack for the tests that need real models."""

import numpy as np
import pytest

from augdiff.datamodel import EmbeddingVector, ImageSample, LabeledDataset, quantize01
from augdiff.harness.datasets import build_desk_dataset


def make_image(value=0.5, side=8, channels=1):
    return np.full((side, side, channels), np.float32(value))


def tiny_dataset(counts=(3, 2), side=8, split="train"):
    """Hand-built dataset with the given per-class train counts."""
    samples = []
    for label, count in enumerate(counts):
        for i in range(count):
            pixels = quantize01(np.full((side, side, 1), (label + 1) / (len(counts) + 1)))
            samples.append(
                ImageSample(f"real-{label}-{split}-{i}", pixels, label, split)
            )
    names = tuple(f"class{k}" for k in range(len(counts)))
    return LabeledDataset(tuple(samples), len(counts), names)


class StubEncoder:
    """Deterministic projection encoder; no training, no torch."""

    def __init__(self, dim=16, seed=123):
        self.dim = dim
        rng = np.random.default_rng(seed)
        self._proj = rng.standard_normal((dim, 8 * 8)).astype(np.float32) * 0.1
        self.encoder_id = f"stub-d{dim}"

    def encode(self, pixels):
        flat = np.asarray(pixels, dtype=np.float32).mean(axis=2).reshape(-1)
        if flat.shape[0] != 64:
            flat = np.resize(flat, 64)
        return EmbeddingVector(self._proj @ flat, self.encoder_id)

    def encode_samples(self, samples):
        return np.stack([self.encode(s.pixels).values for s in samples])


@pytest.fixture
def stub_encoder():
    return StubEncoder()


@pytest.fixture
def two_class_ds():
    return tiny_dataset(counts=(3, 2))


@pytest.fixture(scope="session")
def desk_small():
    """A small real desk dataset: 10 classes, 12/4/4 per split."""
    return build_desk_dataset(seed=7, train_per_class=12, val_per_class=4, test_per_class=4)


@pytest.fixture(scope="session")
def desk_encoder(desk_small):
    from augdiff.generator import train_encoder

    return train_encoder(desk_small, epochs=5, seed=11)


@pytest.fixture(scope="session")
def desk_generator(desk_small, desk_encoder):
    """A briefly trained generator over the small desk dataset."""
    from augdiff.generator import DenoiserConfig, linear_schedule, train_generator

    schedule = linear_schedule(64)
    cfg = DenoiserConfig(widths=(16, 24, 32), time_dim=32, num_classes=10)
    generator, history = train_generator(
        desk_small, desk_encoder, cfg, schedule, epochs=4, seed=5
    )
    return generator, history
