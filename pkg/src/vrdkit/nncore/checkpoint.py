"""Versioned checkpoint container: parameter arrays plus a JSON config block.

Arrays round-trip bit-exactly (little-endian npy inside an npz archive).
Writes are atomic.
"""

from __future__ import annotations

import io
import json
import os
from pathlib import Path

import numpy as np

from .tensor import Parameter
from ..util import atomic_write_bytes

FORMAT_VERSION = 1
_META_KEY = "__vrdkit_meta__"


class CheckpointError(ValueError):
    """Unreadable or incompatible checkpoint file."""


def save_checkpoint(path, params, config: dict) -> None:
    """Write parameters and a config block to an npz container."""
    values = list(params.values() if isinstance(params, dict) else params)
    names = [p.name for p in values]
    if len(set(names)) != len(names):
        raise CheckpointError("duplicate parameter names")
    meta = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "params": {p.name: {"shape": list(p.data.shape), "dtype": str(p.data.dtype)} for p in values},
    }
    arrays = {p.name: p.data for p in values}
    arrays[_META_KEY] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path):
    """Return (params dict name -> Parameter, config dict). Bit-exact reload."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            if _META_KEY not in archive:
                raise CheckpointError(f"{path}: not a vrdkit checkpoint")
            meta = json.loads(bytes(archive[_META_KEY]).decode("utf-8"))
            if meta.get("format_version") != FORMAT_VERSION:
                raise CheckpointError(
                    f"{path}: unsupported format version {meta.get('format_version')}"
                )
            params = {}
            for name, info in meta["params"].items():
                arr = archive[name]
                if list(arr.shape) != info["shape"]:
                    raise CheckpointError(f"{path}: shape mismatch for {name}")
                params[name] = Parameter(name, arr, dtype=arr.dtype)
    except (OSError, ValueError, KeyError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    return params, meta["config"]
