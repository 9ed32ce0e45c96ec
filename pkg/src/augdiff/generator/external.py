"""Adapter for an external pretrained image+text generator.

The transport is deployment-defined: any callable taking the serialized
request record and returning a response dict. Requests and responses go
through the shared synthetic-image cache, so repeated keys never reach the
endpoint and the adapter stays idempotent.

Request record: ``{"class_text", "class_label", "embedding" (flat floats),
"encoder_id", "cfg_scale", "steps", "seed", "batch"}``.
Response: ``{"images": [image, ...]}`` with ``batch`` entries, each an
(H, W, C) nested list or array of floats in [0, 1].
"""

from __future__ import annotations

import numpy as np

from ..cache import generation_key
from ..datamodel import ImageSample, Provenance, quantize01
from ..errors import GenerationError
from .diffusion import GeneratorInterface, slot_seeds


class TransportUnavailable(Exception):
    """Raised by transports when the endpoint cannot be reached."""


class ExternalGenerator(GeneratorInterface):
    def __init__(self, transport, cache, retries=3):
        self.transport = transport
        self.cache = cache
        self.retries = retries
        self.calls = 0  # transport invocations actually issued

    def generate(self, bundle, cfg):
        slots = [
            (
                seed,
                generation_key(
                    bundle.method, bundle.source_ids, seed, cfg.cfg_scale, cfg.steps,
                    embedding=bundle.image_embedding.values,
                ),
            )
            for seed in slot_seeds(cfg)
        ]
        cached = [self.cache.load(bundle.class_text, key) for _, key in slots]
        if any(px is None for px in cached):
            images = self._request(bundle, cfg)
            cached = []
            for (slot_seed, key), image in zip(slots, images):
                pixels = quantize01(np.asarray(image, dtype=np.float64))
                self.cache.store(bundle.class_text, key, pixels)
                cached.append(pixels)
        samples = []
        for (slot_seed, key), pixels in zip(slots, cached):
            prov = Provenance(
                origin="synthetic",
                method=bundle.method,
                cfg_scale=cfg.cfg_scale,
                seed=slot_seed,
                source_ids=bundle.source_ids,
            )
            samples.append(
                ImageSample(
                    sample_id=f"synth-{bundle.class_label}-{slot_seed:016x}",
                    pixels=pixels,
                    label=bundle.class_label,
                    split="train",
                    provenance=prov,
                )
            )
        return samples

    def _request(self, bundle, cfg):
        record = {
            "class_text": bundle.class_text,
            "class_label": bundle.class_label,
            "embedding": [float(v) for v in bundle.image_embedding.values],
            "encoder_id": bundle.image_embedding.encoder_id,
            "cfg_scale": cfg.cfg_scale,
            "steps": cfg.steps,
            "seed": cfg.seed,
            "batch": cfg.batch,
        }
        request_key = generation_key(
            bundle.method, bundle.source_ids, cfg.seed, cfg.cfg_scale, cfg.steps
        )
        last_error = None
        for _ in range(self.retries):
            try:
                self.calls += 1
                response = self.transport(record)
                break
            except TransportUnavailable as exc:
                last_error = exc
        else:
            raise GenerationError(
                f"external generator unavailable: {last_error}",
                retriable=True,
                request_key=request_key,
            )

        images = response.get("images") if isinstance(response, dict) else None
        if images is None or len(images) != cfg.batch:
            got = "missing" if images is None else len(images)
            raise GenerationError(
                f"external generator returned {got} images, expected {cfg.batch}",
                retriable=False,
                request_key=request_key,
            )
        return images
