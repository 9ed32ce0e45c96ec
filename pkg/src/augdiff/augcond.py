"""Augmentation-conditioning operators.

Each method turns one or two real training images of a class (or their
embeddings) into the conditioning embedding handed to the generator,
together with the class label and class name. All operators are pure
functions of their inputs and the rng stream, so a fixed seed reproduces
outputs bit-for-bit.

Pixel-space mixing runs before encoding; embedding-space mixing runs on the
encoded vectors; dropout always applies to the final embedding. Both source
images share one class, so labels are never mixed and the mixing
coefficient is resampled independently for every generated image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datamodel import EmbeddingVector
from .errors import DataError
from .seeding import np_rng

METHODS = (
    "RandomImage",
    "Dropout",
    "Mixup",
    "Mixup-Dropout",
    "Embed-Mixup",
    "Embed-Mixup-Dropout",
    "CutMix",
    "CutMix-Dropout",
    "Embed-CutMix",
    "Embed-CutMix-Dropout",
)

PATCH_STYLES = ("contiguous", "scattered")


@dataclass(frozen=True)
class AugmentationSpec:
    """Which augmentation to run, where, and with which parameters."""

    method: str
    beta_alpha: float = 1.0
    dropout_p: float = 0.4
    rng_seed: int = 0
    embed_patch_style: str = "contiguous"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.beta_alpha > 0:
            raise ValueError("beta_alpha must be > 0")
        if not 0.0 <= self.dropout_p <= 1.0:
            raise ValueError("dropout_p must lie in [0, 1]")
        if self.embed_patch_style not in PATCH_STYLES:
            raise ValueError(f"embed_patch_style must be one of {PATCH_STYLES}")

    @property
    def uses_pair(self):
        return "Mixup" in self.method or "CutMix" in self.method

    @property
    def mixes_embeddings(self):
        return self.method.startswith("Embed-")

    @property
    def applies_dropout(self):
        return self.method == "Dropout" or self.method.endswith("-Dropout")


@dataclass(frozen=True)
class MixCoefficient:
    """Convex mixing weight toward the first input."""

    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("mix coefficient must lie in [0, 1]")


@dataclass(frozen=True)
class PatchMask:
    """Rectangle fully inside an H x W image; the replaced region."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if min(self.top, self.left, self.height, self.width) < 0:
            raise ValueError("patch fields must be non-negative")

    def area(self):
        return self.height * self.width


@dataclass(frozen=True, eq=False)
class ConditioningBundle:
    """The generator-facing conditioning: embedding, class label, class name.

    ``method`` and ``source_ids`` travel along so generated samples can be
    stamped with complete provenance.
    """

    image_embedding: EmbeddingVector
    class_label: int
    class_text: str
    method: str = "none"
    source_ids: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "source_ids", tuple(self.source_ids))
        if not self.class_text:
            raise DataError("class_text must be non-empty")


def sample_mix_coefficient(alpha, rng):
    """Draw the mixing weight from Beta(alpha, alpha)."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    return MixCoefficient(float(rng.beta(alpha, alpha)))


def sample_patch_mask(lam, height, width, rng):
    """Rectangle covering a (1 - lam) fraction of the image, up to rounding.

    Side lengths are ``round(dim * sqrt(1 - lam))`` and the offset is drawn
    uniformly so the patch always fits fully inside the image; lam = 0 is an
    exact full-image patch at (0, 0) and lam = 1 a zero-area patch.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    frac = math.sqrt(1.0 - lam)
    ph = int(round(height * frac))
    pw = int(round(width * frac))
    top = int(rng.integers(0, height - ph + 1))
    left = int(rng.integers(0, width - pw + 1))
    return PatchMask(top=top, left=left, height=ph, width=pw)


def _check_same_shape(x1, x2):
    if x1.shape != x2.shape:
        raise ValueError(f"shape mismatch: {x1.shape} vs {x2.shape}")


def cutmix_pixel(x1, x2, lam, rng):
    """Replace a random rectangle of x1 with the same rectangle of x2."""
    x1 = np.asarray(x1, dtype=np.float32)
    x2 = np.asarray(x2, dtype=np.float32)
    _check_same_shape(x1, x2)
    mask = sample_patch_mask(lam, x1.shape[0], x1.shape[1], rng)
    out = x1.copy()
    out[mask.top : mask.top + mask.height, mask.left : mask.left + mask.width] = x2[
        mask.top : mask.top + mask.height, mask.left : mask.left + mask.width
    ]
    return out


def mixup_pixel(x1, x2, lam):
    """Elementwise convex combination lam * x1 + (1 - lam) * x2."""
    x1 = np.asarray(x1, dtype=np.float32)
    x2 = np.asarray(x2, dtype=np.float32)
    _check_same_shape(x1, x2)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    return (np.float32(lam) * x1 + np.float32(1.0 - lam) * x2).astype(np.float32)


def _check_compatible(e1, e2):
    if e1.dim != e2.dim:
        raise ValueError(f"embedding dimension mismatch: {e1.dim} vs {e2.dim}")
    if e1.encoder_id != e2.encoder_id:
        raise ValueError(
            f"encoder mismatch: {e1.encoder_id!r} vs {e2.encoder_id!r}"
        )


def cutmix_embedding(e1, e2, lam, rng, style="contiguous"):
    """Replace a coordinate segment of e1 with e2's values.

    The segment has length ``round((1 - lam) * d)``. ``contiguous`` places it
    at a uniform offset, mirroring the pixel-space patch on a 1-D vector;
    ``scattered`` draws the coordinates uniformly without replacement.
    """
    _check_compatible(e1, e2)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if style not in PATCH_STYLES:
        raise ValueError(f"style must be one of {PATCH_STYLES}")
    d = e1.dim
    seg = int(round((1.0 - lam) * d))
    out = e1.values.copy()
    if style == "contiguous":
        offset = int(rng.integers(0, d - seg + 1))
        out[offset : offset + seg] = e2.values[offset : offset + seg]
    else:
        idx = rng.choice(d, size=seg, replace=False)
        out[idx] = e2.values[idx]
    return EmbeddingVector(out, e1.encoder_id)


def mixup_embedding(e1, e2, lam):
    """Elementwise convex combination of two embeddings."""
    _check_compatible(e1, e2)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    mixed = np.float32(lam) * e1.values + np.float32(1.0 - lam) * e2.values
    return EmbeddingVector(mixed, e1.encoder_id)


def dropout_embedding(e, p, rng):
    """Inverted dropout: zero coordinates w.p. p, scale survivors by 1/(1-p).

    p = 0 is the identity and p = 1 the all-zero vector (no scaling).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p == 0.0:
        return EmbeddingVector(e.values.copy(), e.encoder_id)
    if p == 1.0:
        return EmbeddingVector(np.zeros_like(e.values), e.encoder_id)
    keep = rng.random(e.dim) >= p
    scaled = e.values / np.float32(1.0 - p)
    return EmbeddingVector(np.where(keep, scaled, np.float32(0.0)), e.encoder_id)


def select_source_pair(ds, class_k, rng):
    """Two uniform draws from class k's real training images.

    Distinct when the class has at least two images; a single image is used
    twice when the class has exactly one.
    """
    pool = ds.class_samples(class_k, split="train", origin="real")
    if not pool:
        raise DataError(f"class {class_k} has no real training images")
    if len(pool) == 1:
        return pool[0], pool[0]
    i, j = rng.choice(len(pool), size=2, replace=False)
    return pool[int(i)], pool[int(j)]


def _select_single(ds, class_k, rng):
    pool = ds.class_samples(class_k, split="train", origin="real")
    if not pool:
        raise DataError(f"class {class_k} has no real training images")
    return pool[int(rng.integers(0, len(pool)))]


def build_conditioning(spec, ds, class_k, encoder, rng=None):
    """Run one augmentation method end to end and return the bundle.

    Draw order is fixed (source selection, mixing weight, patch placement,
    dropout mask) so one rng stream reproduces a bundle exactly.
    """
    if rng is None:
        rng = np_rng(spec.rng_seed)
    class_text = ds.class_names[class_k]

    if not spec.uses_pair:
        x1 = _select_single(ds, class_k, rng)
        source_ids = (x1.sample_id,)
        embedding = encoder.encode(x1.pixels)
    else:
        x1, x2 = select_source_pair(ds, class_k, rng)
        source_ids = (x1.sample_id, x2.sample_id)
        lam = sample_mix_coefficient(spec.beta_alpha, rng).value
        if spec.mixes_embeddings:
            e1 = encoder.encode(x1.pixels)
            e2 = encoder.encode(x2.pixels)
            if "CutMix" in spec.method:
                embedding = cutmix_embedding(e1, e2, lam, rng, style=spec.embed_patch_style)
            else:
                embedding = mixup_embedding(e1, e2, lam)
        else:
            if "CutMix" in spec.method:
                mixed = cutmix_pixel(x1.pixels, x2.pixels, lam, rng)
            else:
                mixed = mixup_pixel(x1.pixels, x2.pixels, lam)
            embedding = encoder.encode(mixed)

    if spec.applies_dropout:
        embedding = dropout_embedding(embedding, spec.dropout_p, rng)

    return ConditioningBundle(
        image_embedding=embedding,
        class_label=class_k,
        class_text=class_text,
        method=spec.method,
        source_ids=source_ids,
    )
