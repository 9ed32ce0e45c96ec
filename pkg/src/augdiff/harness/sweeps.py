"""Guidance-scale and dropout-probability sweeps.

Every cell shares the same base artifacts and seeds; only the swept knob
changes. Cell failures are recorded on the row and the sweep continues.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from ..augcond import build_conditioning
from ..curriculum import plan_balance
from ..seeding import derive_seed, np_rng
from .campaign import run_generation_campaign
from .metrics import (
    fid_score,
    per_class_feature_variance,
    within_class_diversity,
)
from .experiment import prepare_base, run_single_method

log = logging.getLogger(__name__)


@dataclass
class SweepRow:
    value: float
    overall: float | None = None
    many: float | None = None
    medium: float | None = None
    few: float | None = None
    fid: float | None = None
    diversity: float | None = None
    feature_variance: float | None = None
    embedding_variance: float | None = None
    error: str | None = None

    def as_dict(self):
        return {
            "value": self.value,
            "overall": self.overall,
            "many": self.many,
            "medium": self.medium,
            "few": self.few,
            "fid": self.fid,
            "diversity": self.diversity,
            "feature_variance": self.feature_variance,
            "embedding_variance": self.embedding_variance,
            "error": self.error,
        }


def _synth_features(encoder, synth):
    train = list(synth.restrict(split="train").samples)
    feats = encoder.encode_samples(train)
    labels = np.array([s.label for s in train])
    return feats, labels


def run_cfg_sweep(config, scales, cache, base=None):
    """Full generate -> train -> eval per guidance scale; Table-2-shaped rows.

    Seeds are shared across cells, so rows differ only through the scale.
    Also reports the per-class feature variance of each cell's generated
    images as a diversity diagnostic.
    """
    base = base or prepare_base(config)
    rows = []
    for scale in scales:
        row = SweepRow(value=float(scale))
        try:
            gen_cfg = config.generation(
                cfg_scale=float(scale), seed=derive_seed(config.seed, "sweep-cfg")
            )
            accuracy, synth, _ = run_single_method(
                config, base, cache, gen_cfg=gen_cfg, seed=config.seed
            )
            feats, labels = _synth_features(base.encoder, synth)
            real_eval = base.encoder.encode_samples(
                list(base.full_ds.restrict(split="val").samples)
            )
            row.overall = accuracy.overall
            row.many = accuracy.many
            row.medium = accuracy.medium
            row.few = accuracy.few
            row.fid = fid_score(real_eval, feats)
            row.feature_variance = per_class_feature_variance(
                feats, labels, base.lt_ds.num_classes
            )
        except Exception as exc:  # keep sweeping; the row carries the failure
            log.exception("cfg sweep cell %.2f failed", scale)
            row.error = str(exc)
        rows.append(row)
    return rows


def conditioning_embedding_variance(encoder, ds, spec, draws=200, seed=0):
    """Monte-Carlo mean per-coordinate variance of the conditioning embedding.

    Measured pre-generation over fresh bundles, one class at a time, then
    averaged; this is the dropout-strength diagnostic.
    """
    rng = np_rng(seed, "cond-var")
    per_class = []
    for k in range(ds.num_classes):
        vectors = np.stack(
            [
                build_conditioning(spec, ds, k, encoder, rng=rng).image_embedding.values
                for _ in range(draws)
            ]
        )
        per_class.append(vectors.var(axis=0).mean())
    return float(np.mean(per_class))


def run_dropout_sweep(config, ps, cache, base=None, quota_target=None, variance_draws=200):
    """Generation diversity and FID-to-real across dropout probabilities."""
    base = base or prepare_base(config)
    real_eval = base.encoder.encode_samples(
        list(base.full_ds.restrict(split="val").samples)
    )
    target = quota_target or config.balance_target
    shared_seed = derive_seed(config.seed, "sweep-dropout")
    rows = []
    for p in ps:
        row = SweepRow(value=float(p))
        try:
            spec = replace(config.augmentation(method="Dropout"), dropout_p=float(p))
            row.embedding_variance = conditioning_embedding_variance(
                base.encoder, base.lt_ds, spec, draws=variance_draws,
                seed=derive_seed(config.seed, "dropout-var"),
            )
            gen_cfg = config.generation(seed=shared_seed)
            plan = plan_balance(base.lt_ds, target)
            synth = run_generation_campaign(
                plan, base.lt_ds, spec, gen_cfg, base.generator, base.encoder, cache
            )
            feats, labels = _synth_features(base.encoder, synth)
            row.fid = fid_score(real_eval, feats)
            row.diversity = within_class_diversity(feats, labels, base.lt_ds.num_classes)
        except Exception as exc:
            log.exception("dropout sweep cell %.2f failed", p)
            row.error = str(exc)
        rows.append(row)
    return rows
