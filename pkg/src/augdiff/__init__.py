"""Augmentation-conditioned diffusion for synthetic training data.

The pipeline conditions a small trainable diffusion generator on augmented
real images (CutMix / Mixup / Dropout, in pixel or embedding space), builds
long-tail and few-shot curricula from the generated images, trains
classifiers on mixed real+synthetic batches, and evaluates top-1 accuracy
by class category alongside FID.
"""

__version__ = "0.1.0"
