"""Versioned checkpoint container for named parameter arrays.

A checkpoint is an .npz archive holding one float64 array per parameter name
plus a JSON metadata entry (model variant, sizes, vocabulary hash, format
version).  Readers reject unknown format versions.
"""

from __future__ import annotations

import json

import numpy as np

FORMAT_VERSION = 1
_META_KEY = "__meta__"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, params, metadata):
    """Write name -> Tensor mapping plus a metadata dict."""
    meta = dict(metadata)
    meta["format_version"] = FORMAT_VERSION
    arrays = {}
    for name, tensor in params.items():
        if _META_KEY in name:
            raise CheckpointError(f"reserved parameter name {name!r}")
        arrays[name] = np.asarray(tensor.values, dtype=np.float64)
    np.savez(path, **{_META_KEY: np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}, **arrays)


def load_checkpoint(path):
    """Return (name -> array mapping, metadata dict); rejects unknown versions."""
    with np.load(path) as archive:
        if _META_KEY not in archive:
            raise CheckpointError(f"{path}: not a checkpoint (missing metadata)")
        meta = json.loads(bytes(archive[_META_KEY]).decode())
        version = meta.get("format_version")
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported checkpoint format version {version!r} "
                f"(reader supports {FORMAT_VERSION})")
        arrays = {k: archive[k] for k in archive.files if k != _META_KEY}
    return arrays, meta


def restore_parameters(params, arrays, path="checkpoint"):
    """Copy loaded arrays into an existing name -> Tensor mapping."""
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise CheckpointError(f"{path}: parameter names do not match model "
                              f"(missing {missing}, unexpected {extra})")
    for name, tensor in params.items():
        stored = arrays[name]
        if stored.shape != tensor.values.shape:
            raise CheckpointError(f"{path}: {name} has shape {stored.shape}, "
                                  f"model expects {tensor.values.shape}")
        tensor.values[...] = stored
