"""Generation campaigns: fill a balance plan with cached synthetic images.

Each planned image gets its own seed derived from (campaign seed, class,
index), and its conditioning bundle is built from an rng stream keyed the
same way, so the campaign is a pure function of (plan, spec, config, seed).
Images are generated in fixed index chunks; a chunk whose members are all
cached is skipped, which makes reruns cache hits and interrupted campaigns
resumable without changing any output bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..augcond import build_conditioning
from ..cache import generation_key
from ..datamodel import ImageSample, LabeledDataset, Provenance
from ..errors import GenerationError
from ..seeding import derive_seed, np_rng

log = logging.getLogger(__name__)


@dataclass
class CampaignStats:
    generated: int = 0
    cache_hits: int = 0


def run_generation_campaign(plan, ds, spec, gen_cfg, generator, encoder, cache,
                            stats=None, retries=3):
    """Generate exactly plan.quotas[k] images per class; returns the dataset.

    ``ds`` supplies the real conditioning sources and class names. Every
    output sample carries complete provenance and is backed by the cache.
    """
    if len(plan.quotas) != ds.num_classes:
        raise GenerationError(
            f"plan has {len(plan.quotas)} classes, dataset {ds.num_classes}"
        )
    stats = stats if stats is not None else CampaignStats()
    samples = []
    for k, quota in enumerate(plan.quotas):
        class_name = ds.class_names[k]
        if quota == 0:
            continue
        jobs = []
        for index in range(quota):
            image_seed = derive_seed(gen_cfg.seed, "campaign", k, index)
            bundle = build_conditioning(
                spec, ds, k, encoder, rng=np_rng(image_seed, "bundle")
            )
            key = generation_key(
                bundle.method, bundle.source_ids, image_seed,
                gen_cfg.cfg_scale, gen_cfg.steps,
                embedding=bundle.image_embedding.values,
            )
            jobs.append((image_seed, bundle, key))

        for start in range(0, len(jobs), gen_cfg.batch):
            chunk = jobs[start : start + gen_cfg.batch]
            cached = [cache.load(class_name, key) for _, _, key in chunk]
            if all(px is not None for px in cached):
                stats.cache_hits += len(chunk)
                for (image_seed, bundle, key), px in zip(chunk, cached):
                    samples.append(_sample_from_cache(px, bundle, image_seed, key, gen_cfg))
                continue
            generated = _generate_chunk(generator, chunk, gen_cfg, retries)
            stats.generated += len(chunk)
            for (image_seed, bundle, key), sample in zip(chunk, generated):
                cache.store(
                    class_name, key, sample.pixels,
                    meta={
                        "method": bundle.method,
                        "source_ids": list(bundle.source_ids),
                        "seed": int(image_seed),
                        "cfg_scale": gen_cfg.cfg_scale,
                        "steps": gen_cfg.steps,
                    },
                )
                samples.append(sample)
    return LabeledDataset(tuple(samples), ds.num_classes, ds.class_names)


def _generate_chunk(generator, chunk, gen_cfg, retries):
    bundles = [bundle for _, bundle, _ in chunk]
    seeds = [seed for seed, _, _ in chunk]
    last = None
    for attempt in range(retries):
        try:
            return generator.generate_each(bundles, gen_cfg, seeds)
        except GenerationError as exc:
            if not exc.retriable:
                raise
            last = exc
            log.warning("retriable generation failure (attempt %d): %s", attempt + 1, exc)
    raise GenerationError(
        f"generation failed after {retries} attempts: {last}; completed chunks "
        "are cached, rerun to resume",
        retriable=False,
        request_key=getattr(last, "request_key", None),
    )


def _sample_from_cache(pixels, bundle, image_seed, key, gen_cfg):
    prov = Provenance(
        origin="synthetic",
        method=bundle.method,
        cfg_scale=gen_cfg.cfg_scale,
        seed=int(image_seed),
        source_ids=bundle.source_ids,
    )
    return ImageSample(
        sample_id=f"synth-{bundle.class_label}-{image_seed:016x}",
        pixels=pixels,
        label=bundle.class_label,
        split="train",
        provenance=prov,
    )
