"""Content-addressed cache for generated images.

Keys derive from the full generation recipe (method, source ids, seed,
cfg scale, steps), so regenerating with identical inputs is a cache hit.
Layout: ``<root>/<class_name>/<key>.png`` plus an append-only index
manifest. Writes go through a temp file and an atomic rename, making
duplicate writes of the same key idempotent.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from pathlib import Path

import numpy as np

from .datamodel import decode_png, encode_png

INDEX_NAME = "index.jsonl"


def generation_key(method, source_ids, seed, cfg_scale, steps, embedding=None):
    """Stable hex key for one generated image.

    The conditioning embedding participates through its byte digest:
    without it, sweep cells that differ only in an augmentation parameter
    (e.g. the dropout probability) would collide on identical keys.
    """
    payload = {
        "method": method,
        "source_ids": list(source_ids),
        "seed": int(seed),
        "cfg_scale": float(cfg_scale),
        "steps": int(steps),
    }
    if embedding is not None:
        arr = np.ascontiguousarray(np.asarray(embedding, dtype=np.float32))
        payload["embedding_sha"] = hashlib.sha256(arr.tobytes()).hexdigest()
    canon = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:40]


def _safe(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", name)


class SyntheticCache:
    """Single-writer-per-key image cache with concurrent readers."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, class_name, key):
        return self.root / _safe(class_name) / f"{key}.png"

    def has(self, class_name, key):
        return self._path(class_name, key).is_file()

    def load(self, class_name, key):
        """Pixels for a cached key, or None on a miss."""
        path = self._path(class_name, key)
        if not path.is_file():
            return None
        return decode_png(path.read_bytes())

    def store(self, class_name, key, pixels, meta=None):
        """Write pixels under key; idempotent for duplicate keys."""
        path = self._path(class_name, key)
        if path.is_file():
            return path
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
        tmp.write_bytes(encode_png(pixels))
        os.replace(tmp, path)
        record = {"class": class_name, "key": key}
        if meta:
            record.update(meta)
        with open(self.root / INDEX_NAME, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        return path

    def entries(self):
        """Deduplicated index records, in first-write order."""
        index = self.root / INDEX_NAME
        if not index.is_file():
            return []
        seen = set()
        out = []
        for line in index.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            ident = (rec.get("class"), rec.get("key"))
            if ident in seen:
                continue
            seen.add(ident)
            out.append(rec)
        return out
