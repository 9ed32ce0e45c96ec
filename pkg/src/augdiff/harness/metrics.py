"""Evaluation metrics: category-split top-1 accuracy, FID, and the
diversity diagnostics used by the sweeps.

FID features come from the pipeline's own encoder (penultimate layer), so
scores are comparable within this artifact only, never against
Inception-based numbers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..curriculum import CategoryThresholds, categorize_class
from ..errors import DataError

CATEGORIES = ("many", "medium", "few")


@dataclass(frozen=True)
class CategoryAccuracy:
    """Overall plus per-category top-1; absent categories are None."""

    overall: float
    many: float | None
    medium: float | None
    few: float | None

    def as_dict(self):
        return {
            "overall": self.overall,
            "many": self.many,
            "medium": self.medium,
            "few": self.few,
        }


def top1_by_category(predictions, labels, class_counts, thresholds=CategoryThresholds()):
    """Mean correctness overall and within each train-count category.

    ``class_counts`` are training counts (they decide each class's
    category); predictions/labels come from the evaluation set. A category
    with no evaluation samples is reported as None, not zero.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise DataError(
            f"predictions and labels differ in length: {predictions.shape} vs {labels.shape}"
        )
    if predictions.size == 0:
        raise DataError("empty evaluation set")
    class_counts = np.asarray(class_counts)
    category_of = np.array(
        [categorize_class(int(c), thresholds) for c in class_counts]
    )
    correct = predictions == labels
    out = {"overall": float(correct.mean())}
    for category in CATEGORIES:
        member = np.isin(labels, np.flatnonzero(category_of == category))
        out[category] = float(correct[member].mean()) if member.any() else None
    return CategoryAccuracy(out["overall"], out["many"], out["medium"], out["few"])


def _sqrtm_psd(matrix):
    vals, vecs = np.linalg.eigh(matrix)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid_score(features_a, features_b):
    """Fréchet distance between Gaussians fitted to two feature sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}); the cross term
    uses the symmetrized product sqrt(S_a) S_b sqrt(S_a) with negative
    eigenvalues clipped at zero, plus a small diagonal jitter on failure.
    """
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DataError(f"feature matrices must be (n, d) with matching d: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("non-finite feature values")
    d = a.shape[1]
    if min(a.shape[0], b.shape[0]) <= d:
        warnings.warn(
            f"fewer samples ({min(a.shape[0], b.shape[0])}) than feature dims ({d}); "
            "covariances will be ill-conditioned",
            stacklevel=2,
        )

    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))

    def cross_trace(ca, cb):
        root = _sqrtm_psd(ca)
        inner = root @ cb @ root
        vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
        return np.sum(np.sqrt(np.clip(vals, 0.0, None)))

    try:
        cross = cross_trace(cov_a, cov_b)
    except np.linalg.LinAlgError:
        jitter = 1e-6 * np.eye(d)
        cross = cross_trace(cov_a + jitter, cov_b + jitter)

    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * cross)
    return max(value, 0.0)


def mean_pairwise_distance(features):
    """Mean Euclidean distance over all feature pairs (diversity proxy)."""
    f = np.asarray(features, dtype=np.float64)
    if f.shape[0] < 2:
        return 0.0
    sq = np.sum(f**2, axis=1)
    d2 = np.clip(sq[:, None] + sq[None, :] - 2.0 * (f @ f.T), 0.0, None)
    idx = np.triu_indices(f.shape[0], k=1)
    return float(np.sqrt(d2[idx]).mean())


def within_class_diversity(features, labels, num_classes):
    """Mean over classes of the within-class mean pairwise feature distance."""
    labels = np.asarray(labels)
    values = [
        mean_pairwise_distance(features[labels == k])
        for k in range(num_classes)
        if np.sum(labels == k) >= 2
    ]
    return float(np.mean(values)) if values else 0.0


def per_class_feature_variance(features, labels, num_classes):
    """Mean over classes of the per-coordinate feature variance."""
    labels = np.asarray(labels)
    values = [
        float(np.var(features[labels == k], axis=0).mean())
        for k in range(num_classes)
        if np.sum(labels == k) >= 2
    ]
    return float(np.mean(values)) if values else 0.0
