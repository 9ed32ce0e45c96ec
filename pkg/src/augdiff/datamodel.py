"""Core data types, dataset manifests, and lossless image persistence.

Images are float32 arrays of shape (H, W, C), channels-last, values in
[0, 1]. Persistence snaps pixels onto a 16-bit grid and stores them as PNG
files referenced from a versioned JSONL manifest (one header line, then one
record per sample), so a saved dataset round-trips field-for-field.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import DataError, ManifestError

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"
PIXEL_LEVELS = 65535  # 16-bit storage grid

SPLITS = ("train", "val", "test")
ORIGINS = ("real", "synthetic")


# ---------------------------------------------------------------------------
# pixel helpers


def quantize01(pixels):
    """Snap [0, 1] floats onto the 16-bit storage grid.

    Idempotent; values that came from :func:`read_image` pass through
    unchanged, which is what makes manifest round-trips exact.
    """
    levels = np.rint(np.asarray(pixels, dtype=np.float64) * PIXEL_LEVELS)
    return (levels / PIXEL_LEVELS).astype(np.float32)


def encode_png(pixels):
    """Encode (H, W, C) pixels in [0, 1] as 16-bit PNG bytes."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise DataError(f"expected (H, W, C) pixels with C in {{1, 3}}, got shape {arr.shape}")
    levels = np.rint(arr * PIXEL_LEVELS).astype(np.uint16)
    if levels.shape[2] == 1:
        levels = levels[:, :, 0]
    else:
        levels = levels[:, :, ::-1]  # OpenCV writes channels as BGR
    ok, buf = cv2.imencode(".png", levels)
    if not ok:
        raise DataError("PNG encoding failed")
    return buf.tobytes()


def decode_png(data):
    """Decode PNG bytes back to float32 (H, W, C) pixels on the 16-bit grid."""
    raw = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError("PNG decoding failed")
    if raw.dtype == np.uint8:  # tolerate externally produced 8-bit files
        raw = raw.astype(np.uint16) * (PIXEL_LEVELS // 255)
    if raw.ndim == 2:
        raw = raw[:, :, None]
    else:
        raw = raw[:, :, ::-1]
    return (raw.astype(np.float64) / PIXEL_LEVELS).astype(np.float32)


def write_image(path, pixels):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(encode_png(pixels))


def read_image(path):
    return decode_png(Path(path).read_bytes())


def _frozen_pixels(pixels):
    arr = np.array(pixels, dtype=np.float32, copy=True)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Provenance:
    """Where a sample came from and, for synthetic ones, how to regenerate it."""

    origin: str
    method: str = "none"
    cfg_scale: float | None = None
    seed: int | None = None
    source_ids: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "source_ids", tuple(self.source_ids))
        if self.origin not in ORIGINS:
            raise DataError(f"origin must be one of {ORIGINS}, got {self.origin!r}")
        if self.origin == "synthetic":
            missing = []
            if self.method == "none":
                missing.append("method")
            if self.cfg_scale is None:
                missing.append("cfg_scale")
            if self.seed is None:
                missing.append("seed")
            if not self.source_ids:
                missing.append("source_ids")
            if missing:
                raise DataError(f"synthetic provenance missing {', '.join(missing)}")
            if len(self.source_ids) not in (1, 2):
                raise DataError("synthetic provenance needs 1 or 2 source ids")
            if self.cfg_scale < 0:
                raise DataError("cfg_scale must be >= 0")
        elif self.source_ids:
            raise DataError("real samples must not list source ids")


REAL = Provenance(origin="real")


@dataclass(frozen=True, eq=False)
class ImageSample:
    """One image with label, split tag, and provenance."""

    sample_id: str
    pixels: np.ndarray  # (H, W, C) float32 in [0, 1]
    label: int
    split: str
    provenance: Provenance = REAL

    def __post_init__(self):
        object.__setattr__(self, "pixels", _frozen_pixels(self.pixels))
        if self.pixels.ndim != 3 or self.pixels.shape[2] not in (1, 3):
            raise DataError(
                f"sample {self.sample_id}: pixels must be (H, W, C) with C in {{1, 3}}, "
                f"got shape {self.pixels.shape}"
            )
        if not np.all(np.isfinite(self.pixels)):
            raise DataError(f"sample {self.sample_id}: non-finite pixel values")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise DataError(f"sample {self.sample_id}: pixel values outside [0, 1]")
        if self.split not in SPLITS:
            raise DataError(f"sample {self.sample_id}: split must be one of {SPLITS}")
        if self.label < 0:
            raise DataError(f"sample {self.sample_id}: negative label")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A d-dimensional image embedding tagged with the encoder that made it."""

    values: np.ndarray
    encoder_id: str

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float32, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 1:
            raise DataError(f"embedding must be a 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("embedding contains non-finite values")

    @property
    def dim(self):
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """An immutable collection of samples with a fixed class vocabulary."""

    samples: tuple[ImageSample, ...]
    num_classes: int
    class_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.num_classes <= 0:
            raise DataError("num_classes must be positive")
        if len(self.class_names) != self.num_classes:
            raise DataError(
                f"{len(self.class_names)} class names for {self.num_classes} classes"
            )
        if any(not name for name in self.class_names):
            raise DataError("class names must be non-empty")
        for sample in self.samples:
            if sample.label >= self.num_classes:
                raise DataError(
                    f"sample {sample.sample_id}: label {sample.label} out of range "
                    f"for {self.num_classes} classes"
                )

    def __len__(self):
        return len(self.samples)

    def restrict(self, split=None, origin=None):
        """New dataset holding only samples matching the given split/origin."""
        kept = tuple(
            s
            for s in self.samples
            if (split is None or s.split == split)
            and (origin is None or s.provenance.origin == origin)
        )
        return LabeledDataset(kept, self.num_classes, self.class_names)

    def class_samples(self, label, split=None, origin=None):
        return tuple(
            s
            for s in self.samples
            if s.label == label
            and (split is None or s.split == split)
            and (origin is None or s.provenance.origin == origin)
        )

    def replace_samples(self, samples):
        return LabeledDataset(tuple(samples), self.num_classes, self.class_names)


def class_histogram(ds):
    """Per-class sample counts; entry k counts samples with label k."""
    counts = np.zeros(ds.num_classes, dtype=np.int64)
    for sample in ds.samples:
        counts[sample.label] += 1
    return counts


def datasets_equal(a, b):
    """Field-for-field equality, including pixels and provenance."""
    if a.num_classes != b.num_classes or a.class_names != b.class_names:
        return False
    if len(a.samples) != len(b.samples):
        return False
    for sa, sb in zip(a.samples, b.samples):
        if (
            sa.sample_id != sb.sample_id
            or sa.label != sb.label
            or sa.split != sb.split
            or sa.provenance != sb.provenance
            or not np.array_equal(sa.pixels, sb.pixels)
        ):
            return False
    return True


# ---------------------------------------------------------------------------
# manifest persistence


def _safe_name(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", name)


def save_manifest(ds, out_dir, extra=None):
    """Write a dataset as PNG files plus a JSONL manifest; returns the manifest path.

    Layout: ``<out_dir>/images/<class_name>/<sample_id>.png`` with
    ``<out_dir>/manifest.jsonl`` referencing them by relative path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = {
        "version": MANIFEST_VERSION,
        "kind": "labeled-dataset",
        "num_classes": ds.num_classes,
        "class_names": list(ds.class_names),
    }
    if extra:
        header["extra"] = dict(extra)
    lines = [json.dumps(header, sort_keys=True)]
    for sample in ds.samples:
        rel = f"images/{_safe_name(ds.class_names[sample.label])}/{_safe_name(sample.sample_id)}.png"
        write_image(out_dir / rel, sample.pixels)
        prov = sample.provenance
        record = {
            "path": rel,
            "sample_id": sample.sample_id,
            "label": sample.label,
            "split": sample.split,
            "origin": prov.origin,
            "method": prov.method,
            "cfg_scale": prov.cfg_scale,
            "seed": prov.seed,
            "source_ids": list(prov.source_ids),
        }
        lines.append(json.dumps(record, sort_keys=True))
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest_path


def load_manifest(path):
    """Load a dataset saved by :func:`save_manifest`.

    ``path`` may point at the manifest file or its directory. Malformed
    records raise :class:`ManifestError` naming the offending record.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise ManifestError(f"manifest not found at {path}")
    root = path.parent
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestError("empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"unparseable header: {exc}") from exc
    if header.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version {header.get('version')!r}")
    try:
        num_classes = int(header["num_classes"])
        class_names = tuple(str(n) for n in header["class_names"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed header: {exc}") from exc

    samples = []
    for index, line in enumerate(lines[1:]):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"unparseable JSON: {exc}", record=index) from exc
        try:
            label = int(rec["label"])
            if label >= num_classes or label < 0:
                raise ManifestError(
                    f"label {label} out of range for {num_classes} classes", record=index
                )
            provenance = Provenance(
                origin=rec["origin"],
                method=rec.get("method", "none"),
                cfg_scale=rec.get("cfg_scale"),
                seed=rec.get("seed"),
                source_ids=tuple(rec.get("source_ids") or ()),
            )
            pixels = read_image(root / rec["path"])
            samples.append(
                ImageSample(
                    sample_id=str(rec["sample_id"]),
                    pixels=pixels,
                    label=label,
                    split=str(rec["split"]),
                    provenance=provenance,
                )
            )
        except ManifestError:
            raise
        except (KeyError, TypeError, ValueError, DataError) as exc:
            raise ManifestError(str(exc), record=index) from exc
    return LabeledDataset(tuple(samples), num_classes, class_names)
