"""Deterministic derivation of independent rng streams from one root seed.

Every stochastic stage takes a seed and hashes it together with a tag path,
so parallel stages (sweep cells, per-image generation, trials) get
independent streams while the whole pipeline stays a pure function of the
root seed.
"""

import hashlib

import numpy as np
import torch

_SEED_SPACE = 2**63 - 1


def derive_seed(seed, *tags):
    """Stable child seed for (seed, tag path)."""
    text = ":".join([str(int(seed))] + [str(t) for t in tags])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % _SEED_SPACE


def np_rng(seed, *tags):
    return np.random.default_rng(derive_seed(seed, *tags) if tags else int(seed))


def torch_generator(seed, *tags):
    gen = torch.Generator()
    gen.manual_seed(derive_seed(seed, *tags) if tags else int(seed))
    return gen
