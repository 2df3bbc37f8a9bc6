"""Small shared helpers: stable hashing, seeded RNGs, atomic file writes."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def stable_hash(*parts) -> int:
    """64-bit integer hash of the parts, stable across processes and platforms.

    Never use the builtin hash() for anything persisted or seeded: it is
    randomized per process.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(*parts) -> np.random.Generator:
    """Deterministic RNG derived from the given seed parts."""
    return np.random.Generator(np.random.PCG64(stable_hash(*parts)))


def stable_json(obj) -> str:
    """JSON with sorted keys, suitable for byte-identical artifact files."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def atomic_write_text(path, text: str) -> None:
    """Write text to path via temp file + rename, so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
