"""Long-tail subsets, synthetic balance plans, few-shot trials, and the
mixed real/synthetic batch stream.

Category boundaries follow the ImageNet-LT convention: few is strictly
below the low threshold, many at or above the high one, medium in between.
Subset builders only ever touch the train split; val and test pass through
untouched. All draws are deterministic under a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datamodel import class_histogram
from .errors import DataError
from .seeding import derive_seed, np_rng

STANDARD_SHOTS = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class LongTailProfile:
    """Per-class training-image targets with declared count bounds."""

    target_counts: tuple[int, ...]
    min_count: int
    max_count: int

    def __post_init__(self):
        object.__setattr__(self, "target_counts", tuple(int(t) for t in self.target_counts))
        if not self.target_counts:
            raise DataError("profile needs at least one class")
        if self.min_count > self.max_count:
            raise DataError("min_count must not exceed max_count")
        for k, target in enumerate(self.target_counts):
            if target <= 0:
                raise DataError(f"class {k}: target must be positive")
            if not self.min_count <= target <= self.max_count:
                raise DataError(
                    f"class {k}: target {target} outside [{self.min_count}, {self.max_count}]"
                )

    @classmethod
    def from_counts(cls, counts):
        counts = tuple(int(c) for c in counts)
        return cls(counts, min(counts), max(counts))


@dataclass(frozen=True)
class CategoryThresholds:
    """Class-category boundaries on training counts."""

    many_min: int = 100
    few_max: int = 20

    def __post_init__(self):
        if not self.few_max < self.many_min:
            raise DataError("few_max must be below many_min")


@dataclass(frozen=True)
class BalancePlan:
    """Per-class synthetic quotas raising every class to a common target."""

    quotas: tuple[int, ...]
    target: int

    def __post_init__(self):
        object.__setattr__(self, "quotas", tuple(int(q) for q in self.quotas))
        if self.target <= 0:
            raise DataError("target must be positive")
        if any(q < 0 for q in self.quotas):
            raise DataError("quotas must be non-negative")

    def total(self):
        return sum(self.quotas)


@dataclass(frozen=True)
class FewShotSpec:
    """Shots per class and trial count for few-shot fine-tuning."""

    shots: int
    trials: int = 4
    allow_nonstandard: bool = False

    def __post_init__(self):
        if self.shots < 1 or self.trials < 1:
            raise DataError("shots and trials must be positive")
        if self.shots not in STANDARD_SHOTS and not self.allow_nonstandard:
            raise DataError(
                f"shots {self.shots} not in {STANDARD_SHOTS}; "
                "set allow_nonstandard for other values"
            )


def categorize_class(count, thresholds=CategoryThresholds()):
    """Exactly one of many / medium / few for every non-negative count."""
    if count < 0:
        raise DataError("count must be >= 0")
    if count >= thresholds.many_min:
        return "many"
    if count < thresholds.few_max:
        return "few"
    return "medium"


def build_longtail_subset(ds, profile, rng):
    """Downsample the real train split to the profile's per-class targets."""
    if len(profile.target_counts) != ds.num_classes:
        raise DataError(
            f"profile has {len(profile.target_counts)} classes, dataset {ds.num_classes}"
        )
    keep_ids = set()
    for k, target in enumerate(profile.target_counts):
        pool = ds.class_samples(k, split="train", origin="real")
        if target > len(pool):
            raise DataError(
                f"class {k} ({ds.class_names[k]}): target {target} exceeds "
                f"available {len(pool)} real training images"
            )
        chosen = rng.choice(len(pool), size=target, replace=False)
        keep_ids.update(pool[int(i)].sample_id for i in chosen)
    kept = tuple(
        s for s in ds.samples if s.split != "train" or s.sample_id in keep_ids
    )
    return ds.replace_samples(kept)


def plan_balance(ds, target):
    """Synthetic quota per class: target minus the real train count."""
    counts = class_histogram(ds.restrict(split="train", origin="real"))
    if target < counts.max():
        worst = int(np.argmax(counts))
        raise DataError(
            f"target {target} below class {worst}'s real count {int(counts.max())}"
        )
    return BalancePlan(tuple(int(target - c) for c in counts), int(target))


def make_fewshot_subsets(ds, spec, rng):
    """Independent per-trial subsets of `shots` images per class.

    Returns a list of (trial_seed, LabeledDataset); validation and test
    splits are untouched. Trial seeds are recorded so manifests can carry
    them.
    """
    base_seed = int(rng.integers(0, 2**31 - 1))
    trials = []
    for trial in range(spec.trials):
        trial_seed = derive_seed(base_seed, "fewshot-trial", trial)
        trial_rng = np_rng(trial_seed)
        keep_ids = set()
        for k in range(ds.num_classes):
            pool = ds.class_samples(k, split="train", origin="real")
            if len(pool) < spec.shots:
                raise DataError(
                    f"class {k} ({ds.class_names[k]}): only {len(pool)} training "
                    f"images for {spec.shots}-shot"
                )
            chosen = trial_rng.choice(len(pool), size=spec.shots, replace=False)
            keep_ids.update(pool[int(i)].sample_id for i in chosen)
        kept = tuple(
            s for s in ds.samples if s.split != "train" or s.sample_id in keep_ids
        )
        trials.append((trial_seed, ds.replace_samples(kept)))
    return trials


class _RefillQueue:
    """Without-replacement draws that reshuffle when the pool is exhausted."""

    def __init__(self, items, rng):
        self.items = list(items)
        self.rng = rng
        self.queue = []

    def take(self, n):
        out = []
        while len(out) < n:
            if not self.queue:
                self.queue = list(self.rng.permutation(len(self.items)))
            out.append(self.items[self.queue.pop()])
        return out


def mixed_batch_stream(real, synth, batch, mode, rng, real_fraction=0.5):
    """Endless stream of batches mixing real and synthetic pools.

    deterministic: every batch holds exactly ``batch * real_fraction`` real
    samples (cycling each pool without replacement). stochastic: each slot
    is independently real with probability ``real_fraction`` (draws with
    replacement). ``real_fraction=1.0`` gives all-real batches.
    """
    real = list(real)
    synth = list(synth)
    if mode not in ("deterministic", "stochastic"):
        raise DataError(f"unknown mode {mode!r}")
    if not 0.0 <= real_fraction <= 1.0:
        raise DataError("real_fraction must lie in [0, 1]")
    if batch < 1:
        raise DataError("batch must be positive")
    if not real and real_fraction > 0.0:
        raise DataError("real pool is empty")
    if not synth and real_fraction < 1.0:
        raise DataError("synthetic pool is empty")

    if mode == "deterministic":
        n_real = batch * real_fraction
        if abs(n_real - round(n_real)) > 1e-9:
            raise DataError(
                f"batch {batch} not divisible for real_fraction {real_fraction}"
            )
        n_real = int(round(n_real))
        real_q = _RefillQueue(real, rng) if n_real else None
        synth_q = _RefillQueue(synth, rng) if n_real < batch else None

        def stream():
            while True:
                picks = []
                if real_q is not None:
                    picks.extend(real_q.take(n_real))
                if synth_q is not None:
                    picks.extend(synth_q.take(batch - n_real))
                order = rng.permutation(len(picks))
                yield [picks[i] for i in order]

    else:

        def stream():
            while True:
                from_real = rng.random(batch) < real_fraction
                yield [
                    real[int(rng.integers(0, len(real)))]
                    if is_real
                    else synth[int(rng.integers(0, len(synth)))]
                    for is_real in from_real
                ]

    return stream()


def batches_per_epoch(num_real, batch, real_fraction=0.5):
    """Batches needed for the real pool to pass through roughly once."""
    per_batch = max(int(round(batch * real_fraction)), 1)
    return max(math.ceil(num_real / per_batch), 1)
