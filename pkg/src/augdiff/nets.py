"""Small convolutional networks shared by the generator and the trainer.

Sized for desk-scale images (28x28, 1 or 3 channels) on CPU. The classifier
doubles as the embedding encoder: its penultimate activations are the image
embedding space the conditioning operators work in.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


class SinusoidalTimeEmbedding(nn.Module):
    """Fixed sin/cos features of the integer diffusion timestep."""

    def __init__(self, dim):
        super().__init__()
        if dim % 2 != 0:
            raise ValueError("time embedding dim must be even")
        self.dim = dim

    def forward(self, t):
        half = self.dim // 2
        freqs = torch.exp(
            -math.log(10000.0) * torch.arange(half, dtype=torch.float32, device=t.device) / half
        )
        angles = t.float()[:, None] * freqs[None, :]
        return torch.cat([torch.sin(angles), torch.cos(angles)], dim=1)


class SmallConvClassifier(nn.Module):
    """Conv stack -> global pool -> embedding -> linear head.

    ``features`` returns the penultimate embedding; ``head`` maps it to K
    logits. ``backbone_parameters`` / ``head_parameters`` give the trainable
    scope split used by last-layer fine-tuning.
    """

    def __init__(self, image_shape=(28, 28, 1), num_classes=10, embed_dim=64, width=32):
        super().__init__()
        h, w, c = image_shape
        self.image_shape = tuple(image_shape)
        self.num_classes = num_classes
        self.embed_dim = embed_dim
        self.conv = nn.Sequential(
            nn.Conv2d(c, width, 3, padding=1),
            nn.BatchNorm2d(width),
            nn.ReLU(),
            nn.Conv2d(width, width, 3, stride=2, padding=1),
            nn.BatchNorm2d(width),
            nn.ReLU(),
            nn.Conv2d(width, 2 * width, 3, stride=2, padding=1),
            nn.BatchNorm2d(2 * width),
            nn.ReLU(),
            nn.Conv2d(2 * width, 2 * width, 3, padding=1),
            nn.BatchNorm2d(2 * width),
            nn.ReLU(),
        )
        self.embed = nn.Linear(2 * width, embed_dim)
        self.head = nn.Linear(embed_dim, num_classes)

    def features(self, x):
        z = self.conv(x)
        z = z.mean(dim=(2, 3))
        return F.relu(self.embed(z))

    def forward(self, x):
        return self.head(self.features(x))

    def backbone_parameters(self):
        for name, p in self.named_parameters():
            if not name.startswith("head."):
                yield p

    def head_parameters(self):
        return self.head.parameters()

    def reset_head(self, generator=None):
        bound = 1.0 / math.sqrt(self.head.in_features)
        with torch.no_grad():
            self.head.weight.uniform_(-bound, bound, generator=generator)
            self.head.bias.uniform_(-bound, bound, generator=generator)


class _CondBlock(nn.Module):
    """Conv block with the fused conditioning added as a per-channel bias."""

    def __init__(self, in_ch, out_ch, cond_dim):
        super().__init__()
        self.norm = nn.GroupNorm(min(8, in_ch), in_ch)
        self.conv = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.proj = nn.Linear(cond_dim, out_ch)

    def forward(self, x, cond):
        h = self.conv(F.silu(self.norm(x)))
        return h + self.proj(cond)[:, :, None, None]


class CondDenoiser(nn.Module):
    """Noise-prediction UNet-lite conditioned on an image embedding.

    The conditioning embedding is projected and concatenated onto the
    timestep embedding; the class is a learned per-class vector added on the
    embedding pathway. A learned null vector stands in for "no conditioning"
    so the same network provides both guided and unguided predictions.
    """

    def __init__(self, image_shape=(28, 28, 1), embed_dim=64, time_dim=64,
                 widths=(32, 64, 96), num_classes=10):
        super().__init__()
        h, w, c = image_shape
        if h % 4 or w % 4:
            raise ValueError("image sides must be divisible by 4 for the down/up path")
        self.image_shape = tuple(image_shape)
        self.embed_dim = embed_dim
        if len(widths) == 2:  # tolerated legacy shape: reuse the last width
            widths = (widths[0], widths[1], widths[1])
        w0, w1, w2 = widths[0], widths[1], widths[2]

        self.time_embed = SinusoidalTimeEmbedding(time_dim)
        self.cond_proj = nn.Sequential(nn.Linear(embed_dim, time_dim), nn.SiLU(),
                                       nn.Linear(time_dim, time_dim))
        self.class_embed = nn.Embedding(num_classes, time_dim)
        self.null_embed = nn.Parameter(torch.zeros(time_dim))
        nn.init.normal_(self.null_embed, std=0.2)
        cond_dim = 2 * time_dim  # [timestep features, conditioning features]

        self.stem = nn.Conv2d(c, w0, 3, padding=1)
        self.down1 = nn.Conv2d(w0, w1, 3, stride=2, padding=1)
        self.block1 = _CondBlock(w1, w1, cond_dim)
        self.down2 = nn.Conv2d(w1, w2, 3, stride=2, padding=1)
        self.block2 = _CondBlock(w2, w2, cond_dim)
        self.block3 = _CondBlock(w2, w2, cond_dim)
        self.up2 = nn.ConvTranspose2d(w2, w1, 4, stride=2, padding=1)
        self.block4 = _CondBlock(2 * w1, w1, cond_dim)
        self.up1 = nn.ConvTranspose2d(w1, w0, 4, stride=2, padding=1)
        self.block5 = _CondBlock(2 * w0, w0, cond_dim)
        self.out = nn.Conv2d(w0, c, 3, padding=1)

    def conditioning(self, embeddings, labels):
        """Fused conditioning vector for (embedding, class) pairs."""
        return self.cond_proj(embeddings) + self.class_embed(labels)

    def null_conditioning(self, batch):
        return self.null_embed[None, :].expand(batch, -1)

    def forward(self, x, t, cond):
        """Predict the noise in x at timestep t under conditioning cond."""
        fused = torch.cat([self.time_embed(t), cond], dim=1)
        s = self.stem(x)
        d1 = self.block1(self.down1(F.silu(s)), fused)
        h = self.block2(self.down2(F.silu(d1)), fused)
        h = self.block3(h, fused)
        h = self.up2(F.silu(h))
        h = self.block4(torch.cat([h, d1], dim=1), fused)
        h = self.up1(F.silu(h))
        h = self.block5(torch.cat([h, s], dim=1), fused)
        return self.out(F.silu(h))


def to_tensor(pixels_batch):
    """(N, H, W, C) [0, 1] numpy batch -> (N, C, H, W) float tensor in [-1, 1]."""
    import numpy as np

    arr = np.array(pixels_batch, dtype=np.float32)  # copy: inputs may be read-only
    t = torch.from_numpy(arr).permute(0, 3, 1, 2)
    return t * 2.0 - 1.0


def to_pixels(tensor):
    """(N, C, H, W) [-1, 1] tensor -> (N, H, W, C) [0, 1] float32 numpy batch."""
    arr = ((tensor.clamp(-1.0, 1.0) + 1.0) / 2.0).permute(0, 2, 3, 1)
    return arr.cpu().numpy().astype("float32")


def stack_pixels(samples):
    """Stack ImageSamples into an (N, H, W, C) array."""
    import numpy as np

    return np.stack([s.pixels for s in samples], axis=0)


def state_checksum(module):
    """Order-stable digest of a module's parameters and buffers."""
    import hashlib

    digest = hashlib.sha256()
    state = module.state_dict()
    for key in sorted(state):
        digest.update(key.encode("utf-8"))
        digest.update(state[key].detach().cpu().numpy().tobytes())
    return digest.hexdigest()
