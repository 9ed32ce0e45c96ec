"""Command-line entry point for the pipeline.

Stages hand artifacts to each other through directories: manifests for
datasets, torch checkpoints for models, a content-addressed cache for
generated images, results.json + rendered tables/figures for reports.
Every command writes its resolved config snapshot before doing anything.

Exit codes: 0 success; 2 config, 3 data, 4 generation, 5 training failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..cache import SyntheticCache
from ..curriculum import build_longtail_subset, plan_balance
from ..datamodel import class_histogram, load_manifest, save_manifest
from ..errors import ConfigError, PipelineError
from ..generator import linear_schedule, train_encoder, train_generator
from ..seeding import derive_seed, np_rng
from ..trainer import (
    load_checkpoint,
    make_classifier,
    save_checkpoint,
    train_from_scratch,
)
from .artifacts import load_generator_checkpoint, save_generator_checkpoint
from .campaign import CampaignStats, run_generation_campaign
from .config import config_hash, load_config, preset_config, write_snapshot
from .datasets import build_dataset
from .experiment import (
    evaluate_by_category,
    fewshot_curve,
    pretrain_backbone,
)
from .metrics import fid_score
from .report import EvalReport, MethodRow, emit_report, load_results, save_results
from .sweeps import run_cfg_sweep, run_dropout_sweep

log = logging.getLogger("augdiff")


def _resolve_config(args):
    if getattr(args, "config", None):
        return load_config(args.config)
    return preset_config(getattr(args, "preset", "desk-10class"))


def _start(args):
    """Resolve config, create the output dir, snapshot the config."""
    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(cfg, out)
    return cfg, out


def _load_real(cfg, args):
    data = getattr(args, "data", None)
    if data:
        return load_manifest(data)
    full = build_dataset(cfg.dataset, seed=derive_seed(cfg.seed, "dataset"))
    return build_longtail_subset(full, cfg.longtail_profile(), np_rng(cfg.seed, "longtail"))


def cmd_build_lt(args):
    cfg, out = _start(args)
    full = build_dataset(cfg.dataset, seed=derive_seed(cfg.seed, "dataset"))
    lt = build_longtail_subset(full, cfg.longtail_profile(), np_rng(cfg.seed, "longtail"))
    save_manifest(full, out / "full")
    save_manifest(lt, out / "lt")
    counts = class_histogram(lt.restrict(split="train")).tolist()
    log.info("long-tail train counts: %s", counts)
    print(json.dumps({"train_counts": counts, "out": str(out)}))
    return 0


def cmd_train_generator(args):
    cfg, out = _start(args)
    ds = _load_real(cfg, args)
    encoder_source = (
        load_manifest(args.encoder_data) if args.encoder_data
        else build_dataset(cfg.dataset, seed=derive_seed(cfg.seed, "dataset"))
    )
    encoder = train_encoder(
        encoder_source, seed=derive_seed(cfg.seed, "encoder"), **cfg.encoder_params()
    )
    schedule = linear_schedule(**cfg.schedule_params())
    generator, history = train_generator(
        ds, encoder, cfg.denoiser(), schedule,
        seed=derive_seed(cfg.seed, "generator"), **cfg.generator_train_params(),
    )
    path = save_generator_checkpoint(
        generator, encoder, out / "generator.pt", history=history, seed=cfg.seed
    )
    log.info("generator loss %.4f -> %.4f", history["epoch_loss"][0], history["epoch_loss"][-1])
    print(json.dumps({"checkpoint": str(path), "final_loss": history["epoch_loss"][-1]}))
    return 0


def cmd_generate(args):
    cfg, out = _start(args)
    generator, encoder, _ = load_generator_checkpoint(args.generator)
    ds = _load_real(cfg, args)
    plan = plan_balance(ds, args.target or cfg.balance_target)
    spec = cfg.augmentation(method=args.method)
    gen_cfg = cfg.generation(cfg_scale=args.cfg_scale)
    cache = SyntheticCache(args.cache or (out / "cache"))
    stats = CampaignStats()
    synth = run_generation_campaign(
        plan, ds, spec, gen_cfg, generator, encoder, cache, stats=stats
    )
    save_manifest(synth, out / "synth", extra={"method": spec.method})
    log.info("campaign: %d generated, %d cache hits", stats.generated, stats.cache_hits)
    print(json.dumps({
        "generated": stats.generated,
        "cache_hits": stats.cache_hits,
        "total": len(synth.samples),
        "out": str(out / "synth"),
    }))
    return 0


def cmd_train(args):
    cfg, out = _start(args)
    real = _load_real(cfg, args)
    synth = load_manifest(args.synth) if args.synth else None
    classifier = make_classifier(
        real.samples[0].pixels.shape, real.num_classes,
        seed=derive_seed(cfg.seed, "classifier"),
    )
    history = train_from_scratch(
        classifier, real, synth, cfg.train(),
        seed=derive_seed(cfg.seed, "train"), metric_log=out / "metrics.jsonl",
    )
    path = save_checkpoint(
        classifier, out / "classifier.pt", config=cfg.train(), seed=cfg.seed,
        history=history,
    )
    print(json.dumps({
        "checkpoint": str(path),
        "final_val_top1": history[-1]["val_top1"],
    }))
    return 0


def cmd_finetune(args):
    cfg, out = _start(args)
    full = load_manifest(args.data) if args.data else build_dataset(
        cfg.dataset, seed=derive_seed(cfg.seed, "dataset")
    )
    if args.backbone:
        backbone, _ = load_checkpoint(args.backbone)
    else:
        backbone = pretrain_backbone(cfg, full, epochs=args.pretrain_epochs)
    synth = load_manifest(args.synth) if args.synth else None
    curve = fewshot_curve(cfg, full, backbone, synth)
    report = EvalReport(fewshot=curve, config_hash=config_hash(cfg), seeds=[cfg.seed])
    save_results(report, out / "results.json")
    emit_report(report, out)
    print(json.dumps({"shots": curve.shots, "means": curve.means}))
    return 0


def cmd_eval(args):
    cfg, out = _start(args)
    classifier, _ = load_checkpoint(args.classifier)
    real = _load_real(cfg, args)
    counts = class_histogram(real.restrict(split="train", origin="real"))
    accuracy = evaluate_by_category(
        classifier, real, counts, cfg.thresholds(), split=args.split
    )
    fid = None
    if args.synth and args.generator:
        _, encoder, _ = load_generator_checkpoint(args.generator)
        synth = load_manifest(args.synth)
        fid = fid_score(
            encoder.encode_samples(list(real.restrict(split="val").samples)),
            encoder.encode_samples(list(synth.restrict(split="train").samples)),
        )
    report = EvalReport(
        overall=accuracy.overall, many=accuracy.many, medium=accuracy.medium,
        few=accuracy.few, fid=fid, config_hash=config_hash(cfg), seeds=[cfg.seed],
    )
    save_results(report, out / "results.json")
    emit_report(report, out)
    print(json.dumps(accuracy.as_dict()))
    return 0


def cmd_fid(args):
    _, encoder, _ = load_generator_checkpoint(args.generator)
    ds_a = load_manifest(args.set_a)
    ds_b = load_manifest(args.set_b)
    value = fid_score(
        encoder.encode_samples(list(ds_a.samples)),
        encoder.encode_samples(list(ds_b.samples)),
    )
    print(json.dumps({"fid": value}))
    return 0


def cmd_sweep_cfg(args):
    cfg, out = _start(args)
    cache = SyntheticCache(args.cache or (out / "cache"))
    rows = run_cfg_sweep(cfg, args.scales, cache)
    report = EvalReport(cfg_sweep=rows, config_hash=config_hash(cfg), seeds=[cfg.seed])
    save_results(report, out / "results.json")
    emit_report(report, out)
    print(json.dumps([r.as_dict() for r in rows]))
    return 0


def cmd_sweep_dropout(args):
    cfg, out = _start(args)
    cache = SyntheticCache(args.cache or (out / "cache"))
    rows = run_dropout_sweep(cfg, args.ps, cache, quota_target=args.target)
    report = EvalReport(dropout_sweep=rows, config_hash=config_hash(cfg), seeds=[cfg.seed])
    save_results(report, out / "results.json")
    emit_report(report, out)
    print(json.dumps([r.as_dict() for r in rows]))
    return 0


def cmd_report(args):
    report = load_results(args.results)
    written = emit_report(report, args.out)
    print(json.dumps({"written": [str(p) for p in written]}))
    return 0


def _add_config_args(sub):
    sub.add_argument("--config", help="YAML config file")
    sub.add_argument("--preset", default="desk-10class", help="named preset")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="augdiff",
        description="Augmentation-conditioned diffusion pipeline (desk scale)",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("build-lt", help="build the long-tail dataset manifests")
    _add_config_args(sub)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_build_lt)

    sub = commands.add_parser("train-generator", help="train encoder and generator")
    _add_config_args(sub)
    sub.add_argument("--out", required=True)
    sub.add_argument("--data", help="long-tail manifest dir (default: rebuild)")
    sub.add_argument("--encoder-data", help="full-split manifest for the encoder")
    sub.set_defaults(func=cmd_train_generator)

    sub = commands.add_parser("generate", help="run a generation campaign")
    _add_config_args(sub)
    sub.add_argument("--out", required=True)
    sub.add_argument("--generator", required=True, help="generator checkpoint")
    sub.add_argument("--data", help="long-tail manifest dir (default: rebuild)")
    sub.add_argument("--method", help="override the conditioning method")
    sub.add_argument("--cfg-scale", type=float, dest="cfg_scale")
    sub.add_argument("--target", type=int, help="override the balance target")
    sub.add_argument("--cache", help="cache dir (default: <out>/cache)")
    sub.set_defaults(func=cmd_generate)

    sub = commands.add_parser("train", help="train a classifier from scratch")
    _add_config_args(sub)
    sub.add_argument("--out", required=True)
    sub.add_argument("--data", help="real manifest dir (default: rebuild)")
    sub.add_argument("--synth", help="synthetic manifest dir")
    sub.set_defaults(func=cmd_train)

    sub = commands.add_parser("finetune", help="few-shot last-layer fine-tuning")
    _add_config_args(sub)
    sub.add_argument("--out", required=True)
    sub.add_argument("--data", help="full dataset manifest (default: rebuild)")
    sub.add_argument("--backbone", help="pretrained classifier checkpoint")
    sub.add_argument("--pretrain-epochs", type=int, dest="pretrain_epochs")
    sub.add_argument("--synth", help="synthetic manifest dir")
    sub.set_defaults(func=cmd_finetune)

    sub = commands.add_parser("eval", help="category top-1 (and FID) for a classifier")
    _add_config_args(sub)
    sub.add_argument("--out", required=True)
    sub.add_argument("--classifier", required=True)
    sub.add_argument("--data", help="real manifest dir (default: rebuild)")
    sub.add_argument("--split", default="test", choices=["val", "test"])
    sub.add_argument("--synth", help="synthetic manifest dir for FID")
    sub.add_argument("--generator", help="generator checkpoint (FID features)")
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser("fid", help="FID between two manifests")
    sub.add_argument("--generator", required=True, help="generator checkpoint")
    sub.add_argument("set_a")
    sub.add_argument("set_b")
    sub.set_defaults(func=cmd_fid)

    sub = commands.add_parser("sweep-cfg", help="guidance-scale sweep")
    _add_config_args(sub)
    sub.add_argument("--out", required=True)
    sub.add_argument("--scales", type=float, nargs="+", default=[2.0, 4.0, 7.0, 10.0])
    sub.add_argument("--cache")
    sub.set_defaults(func=cmd_sweep_cfg)

    sub = commands.add_parser("sweep-dropout", help="dropout-probability sweep")
    _add_config_args(sub)
    sub.add_argument("--out", required=True)
    sub.add_argument("--ps", type=float, nargs="+", default=[0.0, 0.4, 1.0])
    sub.add_argument("--target", type=int, help="per-class quota target")
    sub.add_argument("--cache")
    sub.set_defaults(func=cmd_sweep_dropout)

    sub = commands.add_parser("report", help="render tables and figures from results.json")
    sub.add_argument("--results", required=True)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args) or 0
    except PipelineError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - unexpected failure path
        log.exception("unexpected failure: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
