"""Shared pipeline pieces: base artifacts, single runs, few-shot curves.

A "base" is everything the sweep cells and method comparisons share: the
full desk dataset, the trained encoder, the long-tail subset, and the
trained generator. Cells then differ only in the knob under study
(conditioning method, guidance scale, dropout probability) while seeds stay
fixed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from ..curriculum import build_longtail_subset, make_fewshot_subsets, plan_balance
from ..datamodel import class_histogram
from ..generator import linear_schedule, train_encoder, train_generator
from ..nets import stack_pixels
from ..seeding import derive_seed, np_rng
from ..trainer import (
    finetune_last_layer,
    make_classifier,
    train_from_scratch,
)
from .campaign import run_generation_campaign
from .datasets import build_dataset
from .metrics import top1_by_category

log = logging.getLogger(__name__)


@dataclass
class PipelineBase:
    full_ds: object
    lt_ds: object
    encoder: object
    generator: object
    generator_history: dict
    train_counts: np.ndarray


def prepare_base(config, seed=None, with_generator=True):
    """Build dataset, train encoder and generator once for a family of runs."""
    seed = config.seed if seed is None else seed
    full_ds = build_dataset(config.dataset, seed=derive_seed(seed, "dataset"))
    encoder = train_encoder(
        full_ds, seed=derive_seed(seed, "encoder"), **config.encoder_params()
    )
    lt_ds = build_longtail_subset(
        full_ds, config.longtail_profile(), np_rng(seed, "longtail")
    )
    generator, history = None, {}
    if with_generator:
        schedule = linear_schedule(**config.schedule_params())
        generator, history = train_generator(
            lt_ds, encoder, config.denoiser(), schedule,
            seed=derive_seed(seed, "generator"), **config.generator_train_params(),
        )
    counts = class_histogram(lt_ds.restrict(split="train", origin="real"))
    return PipelineBase(full_ds, lt_ds, encoder, generator, history, counts)


def predictions_on(classifier, ds, split="test"):
    samples = list(ds.restrict(split=split).samples)
    if not samples:
        raise ValueError(f"no samples in split {split!r}")
    classifier.eval()
    preds = []
    with torch.no_grad():
        for start in range(0, len(samples), 256):
            chunk = samples[start : start + 256]
            from ..nets import to_tensor

            logits = classifier(to_tensor(stack_pixels(chunk)))
            preds.append(logits.argmax(dim=1).cpu().numpy())
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return np.concatenate(preds), labels


def evaluate_by_category(classifier, ds, train_counts, thresholds, split="test"):
    preds, labels = predictions_on(classifier, ds, split)
    return top1_by_category(preds, labels, train_counts, thresholds)


def run_single_method(config, base, cache, method=None, gen_cfg=None, seed=None,
                      train_cfg=None):
    """Campaign + from-scratch training + category eval for one method.

    Returns (accuracy: CategoryAccuracy, synth dataset, classifier).
    """
    seed = config.seed if seed is None else seed
    spec = config.augmentation(method=method)
    gen_cfg = gen_cfg or config.generation(seed=derive_seed(seed, "gen", spec.method))
    plan = plan_balance(base.lt_ds, config.balance_target)
    synth = run_generation_campaign(
        plan, base.lt_ds, spec, gen_cfg, base.generator, base.encoder, cache
    )
    classifier = make_classifier(
        base.lt_ds.samples[0].pixels.shape, base.lt_ds.num_classes,
        seed=derive_seed(seed, "classifier"),
    )
    train_from_scratch(
        classifier, base.lt_ds, synth, train_cfg or config.train(),
        seed=derive_seed(seed, "train"),
    )
    accuracy = evaluate_by_category(
        classifier, base.lt_ds, base.train_counts, config.thresholds()
    )
    return accuracy, synth, classifier


def pretrain_backbone(config, full_ds, seed=None, epochs=None):
    """Classifier trained on the full balanced split; few-shot backbone."""
    seed = config.seed if seed is None else seed
    train_cfg = config.train()
    if epochs is not None:
        from dataclasses import replace

        train_cfg = replace(train_cfg, epochs=epochs, loss="cross-entropy")
    classifier = make_classifier(
        full_ds.samples[0].pixels.shape, full_ds.num_classes,
        seed=derive_seed(seed, "backbone"),
    )
    train_from_scratch(
        classifier, full_ds, None, train_cfg, seed=derive_seed(seed, "backbone-train")
    )
    return classifier


@dataclass
class FewShotCurve:
    shots: list[int] = field(default_factory=list)
    means: list[float] = field(default_factory=list)
    variances: list[float] = field(default_factory=list)
    per_trial: list[list[float]] = field(default_factory=list)
    trial_seeds: list[list[int]] = field(default_factory=list)

    def as_dict(self):
        return {
            "shots": self.shots,
            "means": self.means,
            "variances": self.variances,
            "per_trial": self.per_trial,
            "trial_seeds": self.trial_seeds,
        }


def fewshot_curve(config, full_ds, backbone, synth_ds, seed=None):
    """Run the few-shot protocol across the configured shot counts."""
    seed = config.seed if seed is None else seed
    curve = FewShotCurve()
    for spec in config.fewshot_specs():
        trials = make_fewshot_subsets(full_ds, spec, np_rng(seed, "fewshot", spec.shots))
        result = finetune_last_layer(
            backbone, trials, synth_ds, config.finetune(),
            seed=derive_seed(seed, "finetune", spec.shots),
        )
        curve.shots.append(spec.shots)
        curve.means.append(result.mean)
        curve.variances.append(result.variance)
        curve.per_trial.append(result.per_trial)
        curve.trial_seeds.append(result.trial_seeds)
    return curve
