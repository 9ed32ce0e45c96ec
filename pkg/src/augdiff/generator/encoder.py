"""Image -> embedding encoder used for conditioning and FID features.

A small classifier trained on the full (pre-subsampling) training split;
the penultimate layer is the embedding. Encoding is deterministic: the same
image always maps to the same vector.
"""

from __future__ import annotations

import numpy as np
import torch

from ..datamodel import EmbeddingVector
from ..errors import TrainingError, UntrainedModelError
from ..nets import SmallConvClassifier, stack_pixels, state_checksum, to_tensor
from ..seeding import derive_seed, np_rng


class ImageEncoder:
    def __init__(self, net, trained=False):
        self.net = net
        self.net.eval()
        self.trained = trained
        self._id = None

    @property
    def embed_dim(self):
        return self.net.embed_dim

    @property
    def encoder_id(self):
        if self._id is None:
            self._id = f"conv-d{self.net.embed_dim}-{state_checksum(self.net)[:12]}"
        return self._id

    def _check_trained(self):
        if not self.trained:
            raise UntrainedModelError("encoder has not been trained")

    def encode_batch(self, pixels_batch):
        """(N, H, W, C) pixels -> (N, d) float32 embedding matrix."""
        self._check_trained()
        with torch.no_grad():
            feats = self.net.features(to_tensor(np.asarray(pixels_batch)))
        return feats.cpu().numpy().astype(np.float32)

    def encode(self, pixels):
        """Single image -> EmbeddingVector."""
        values = self.encode_batch(np.asarray(pixels)[None])[0]
        return EmbeddingVector(values, self.encoder_id)

    def encode_samples(self, samples):
        if not samples:
            return np.zeros((0, self.embed_dim), dtype=np.float32)
        return self.encode_batch(stack_pixels(samples))


def train_encoder(ds, embed_dim=64, width=32, epochs=10, batch_size=64, lr=2e-3, seed=0):
    """Train the embedding encoder as a classifier on the train split."""
    train = ds.restrict(split="train").samples
    if not train:
        raise TrainingError("no training samples for the encoder")
    image_shape = train[0].pixels.shape

    torch.manual_seed(derive_seed(seed, "encoder-init"))
    net = SmallConvClassifier(image_shape, ds.num_classes, embed_dim=embed_dim, width=width)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    loss_fn = torch.nn.CrossEntropyLoss()
    shuffle = np_rng(seed, "encoder-shuffle")

    pixels = stack_pixels(train)
    labels = np.array([s.label for s in train], dtype=np.int64)
    net.train()
    for _ in range(epochs):
        order = shuffle.permutation(len(train))
        for start in range(0, len(train), batch_size):
            idx = order[start : start + batch_size]
            logits = net(to_tensor(pixels[idx]))
            loss = loss_fn(logits, torch.as_tensor(labels[idx]))
            if not torch.isfinite(loss):
                raise TrainingError("encoder loss diverged")
            opt.zero_grad()
            loss.backward()
            opt.step()
    net.eval()
    return ImageEncoder(net, trained=True)
