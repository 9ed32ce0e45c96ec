"""Classifier training: from scratch on mixed batches, and last-layer
few-shot fine-tuning.

From-scratch training uses momentum SGD (optionally cosine-annealed) with
the balanced softmax loss over deterministic 50/50 real/synthetic batches.
Fine-tuning freezes everything but the final linear layer, uses adaptive
moments, stochastic 50/50 mixing, and reports the best validation accuracy
seen across epochs, per trial.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .curriculum import batches_per_epoch, mixed_batch_stream
from .errors import TrainingError
from .losses import balanced_softmax_batch
from .nets import SmallConvClassifier, stack_pixels, state_checksum, to_tensor
from .seeding import derive_seed, np_rng, torch_generator

LOSSES = ("balanced-softmax", "cross-entropy")
SCHEDULES = ("cosine-anneal", "constant")


@dataclass(frozen=True)
class TrainConfig:
    """From-scratch training hyperparameters (desk-scale defaults)."""

    epochs: int = 25
    batch: int = 64
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    schedule: str = "cosine-anneal"
    loss: str = "balanced-softmax"
    real_fraction: float = 0.5

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1 or self.lr <= 0:
            raise ValueError("epochs, batch and lr must be positive")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")


@dataclass(frozen=True)
class FineTuneConfig:
    """Few-shot fine-tuning hyperparameters; scope is fixed to the last layer."""

    epochs: int = 50
    lr: float = 1e-4
    batch: int = 32
    trainable_scope: str = "last-layer"

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1 or self.lr <= 0:
            raise ValueError("epochs, batch and lr must be positive")
        if self.trainable_scope != "last-layer":
            raise ValueError("only last-layer fine-tuning is supported")


@dataclass
class FewShotResult:
    """Best-epoch validation accuracy per trial, with mean and variance."""

    per_trial: list[float]
    mean: float
    variance: float
    trial_seeds: list[int]


def make_classifier(image_shape, num_classes, seed=0, embed_dim=64, width=32):
    torch.manual_seed(derive_seed(seed, "classifier-init"))
    return SmallConvClassifier(image_shape, num_classes, embed_dim=embed_dim, width=width)


def _predict(classifier, samples, batch=256):
    preds = []
    classifier.eval()
    with torch.no_grad():
        for start in range(0, len(samples), batch):
            chunk = samples[start : start + batch]
            logits = classifier(to_tensor(stack_pixels(chunk)))
            preds.append(logits.argmax(dim=1).cpu().numpy())
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def evaluate_top1(classifier, samples):
    if not samples:
        raise TrainingError("no samples to evaluate")
    preds = _predict(classifier, samples)
    labels = np.array([s.label for s in samples])
    return float((preds == labels).mean())


def _append_metric(path, record):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def train_from_scratch(classifier, real_ds, synth_ds, cfg, seed=0, metric_log=None):
    """Optimize the classifier on mixed batches; returns per-epoch history.

    Loss counts come from the real train split (the long-tail distribution
    the balanced softmax corrects for). Deterministic given the seed on one
    device.
    """
    real_train = list(real_ds.restrict(split="train").samples)
    synth_train = list(synth_ds.restrict(split="train").samples) if synth_ds else []
    if not real_train:
        raise TrainingError("real training pool is empty")
    val = list(real_ds.restrict(split="val").samples)

    real_fraction = cfg.real_fraction if synth_train else 1.0
    # Counts describe the pool actually trained on; with a fully balanced
    # synthetic quota they are equal and the loss reduces to cross-entropy.
    counts = np.zeros(real_ds.num_classes, dtype=np.int64)
    for s in real_train:
        counts[s.label] += 1
    for s in synth_train:
        counts[s.label] += 1
    counts = np.maximum(counts, 1)

    torch.manual_seed(derive_seed(seed, "train-scratch"))
    stream = mixed_batch_stream(
        real_train, synth_train, cfg.batch, "deterministic",
        np_rng(seed, "train-stream"), real_fraction=real_fraction,
    )
    opt = torch.optim.SGD(
        classifier.parameters(), lr=cfg.lr, momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
    )
    scheduler = (
        torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=cfg.epochs)
        if cfg.schedule == "cosine-anneal"
        else None
    )
    per_epoch = batches_per_epoch(len(real_train), cfg.batch, real_fraction)

    history = []
    for epoch in range(cfg.epochs):
        classifier.train()
        losses = []
        for _ in range(per_epoch):
            batch = next(stream)
            logits = classifier(to_tensor(stack_pixels(batch)))
            labels = torch.as_tensor(np.array([s.label for s in batch], dtype=np.int64))
            if cfg.loss == "balanced-softmax":
                loss = balanced_softmax_batch(logits, labels, counts)
            else:
                loss = torch.nn.functional.cross_entropy(logits, labels)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"loss diverged at epoch {epoch} (last finite losses: {losses[-3:]})"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        if scheduler is not None:
            scheduler.step()
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "val_top1": evaluate_top1(classifier, val) if val else None,
            "lr": float(opt.param_groups[0]["lr"]),
        }
        history.append(record)
        if metric_log is not None:
            _append_metric(metric_log, record)
    return history


def finetune_last_layer(classifier, fewshot_trials, synth_ds, cfg, seed=0):
    """Fine-tune only the final layer on each few-shot trial.

    ``fewshot_trials`` is the (trial_seed, dataset) list from
    make_fewshot_subsets. Returns the max-over-epochs validation top-1 per
    trial plus their mean and variance. The backbone is frozen in eval mode,
    so its parameters and running statistics never change.
    """
    if classifier is None:
        raise TrainingError("a pretrained backbone classifier is required")
    synth_train = list(synth_ds.restrict(split="train").samples) if synth_ds else []
    base_state = {k: v.clone() for k, v in classifier.state_dict().items()}

    per_trial = []
    trial_seeds = []
    for index, (trial_seed, trial_ds) in enumerate(fewshot_trials):
        trial_seeds.append(int(trial_seed))
        real_train = list(trial_ds.restrict(split="train").samples)
        val = list(trial_ds.restrict(split="val").samples)
        if not real_train or not val:
            raise TrainingError(f"trial {index}: empty train or val split")

        model = SmallConvClassifier(
            classifier.image_shape, classifier.num_classes,
            embed_dim=classifier.embed_dim, width=classifier.conv[0].out_channels,
        )
        model.load_state_dict(base_state)
        model.reset_head(torch_generator(trial_seed, "head-init"))
        for p in model.backbone_parameters():
            p.requires_grad_(False)
        model.eval()  # backbone stays in eval; only the head trains

        opt = torch.optim.Adam(model.head_parameters(), lr=cfg.lr)
        stream = mixed_batch_stream(
            real_train, synth_train, cfg.batch, "stochastic",
            np_rng(trial_seed, "finetune-stream"),
            real_fraction=0.5 if synth_train else 1.0,
        )
        per_epoch = batches_per_epoch(len(real_train), cfg.batch, 0.5)

        best = 0.0
        for _ in range(cfg.epochs):
            for _ in range(per_epoch):
                batch = next(stream)
                logits = model(to_tensor(stack_pixels(batch)))
                labels = torch.as_tensor(np.array([s.label for s in batch], dtype=np.int64))
                loss = torch.nn.functional.cross_entropy(logits, labels)
                if not torch.isfinite(loss):
                    raise TrainingError(f"trial {index}: loss diverged")
                opt.zero_grad()
                loss.backward()
                opt.step()
            best = max(best, evaluate_top1(model, val))
        per_trial.append(best)

    values = np.array(per_trial, dtype=np.float64)
    variance = float(values.var(ddof=1)) if len(values) > 1 else 0.0
    return FewShotResult(
        per_trial=[float(v) for v in per_trial],
        mean=float(values.mean()),
        variance=variance,
        trial_seeds=trial_seeds,
    )


def save_checkpoint(classifier, path, config=None, seed=None, history=None):
    """Weights + config + seed + metric history in one file."""
    payload = {
        "state_dict": classifier.state_dict(),
        "image_shape": classifier.image_shape,
        "num_classes": classifier.num_classes,
        "embed_dim": classifier.embed_dim,
        "width": classifier.conv[0].out_channels,
        "config": asdict(config) if config is not None else None,
        "seed": seed,
        "history": history,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    return path


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    model = SmallConvClassifier(
        tuple(payload["image_shape"]), payload["num_classes"],
        embed_dim=payload["embed_dim"], width=payload["width"],
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload


def backbone_checksum(classifier):
    """Digest over every non-head parameter and buffer."""
    import hashlib

    digest = hashlib.sha256()
    state = classifier.state_dict()
    for key in sorted(state):
        if key.startswith("head."):
            continue
        digest.update(key.encode("utf-8"))
        digest.update(state[key].detach().cpu().numpy().tobytes())
    return digest.hexdigest()


__all__ = [
    "TrainConfig",
    "FineTuneConfig",
    "FewShotResult",
    "make_classifier",
    "train_from_scratch",
    "finetune_last_layer",
    "evaluate_top1",
    "save_checkpoint",
    "load_checkpoint",
    "backbone_checksum",
    "state_checksum",
]
