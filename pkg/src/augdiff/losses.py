"""Classification losses for long-tail training.

The balanced softmax loss shifts each logit by the log of its class's
training count, correcting the label-distribution mismatch between an
imbalanced train set and a balanced test set. With equal counts it reduces
exactly to cross-entropy. The numpy forms are the reference implementation
(used for gradient checks); the torch form feeds training.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F


def _check_counts(class_counts):
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts < 1):
        raise ValueError("class counts must all be >= 1")
    return counts


def balanced_softmax_loss(logits, label, class_counts):
    """-log( n_y e^{z_y} / sum_k n_k e^{z_k} ), computed stably."""
    z = np.asarray(logits, dtype=np.float64)
    counts = _check_counts(class_counts)
    shifted = z + np.log(counts)
    m = shifted.max()
    log_norm = m + np.log(np.sum(np.exp(shifted - m)))
    return float(log_norm - shifted[label])


def balanced_softmax_grad(logits, label, class_counts):
    """Analytic gradient w.r.t. the logits: softmax(z + log n) - onehot(y)."""
    z = np.asarray(logits, dtype=np.float64)
    counts = _check_counts(class_counts)
    shifted = z + np.log(counts)
    shifted -= shifted.max()
    p = np.exp(shifted)
    p /= p.sum()
    p[label] -= 1.0
    return p


def balanced_softmax_batch(logits, labels, class_counts):
    """Torch batch mean of the balanced softmax loss (training path)."""
    counts = torch.as_tensor(class_counts, dtype=logits.dtype, device=logits.device)
    if torch.any(counts < 1):
        raise ValueError("class counts must all be >= 1")
    return F.cross_entropy(logits + counts.log()[None, :], labels)
