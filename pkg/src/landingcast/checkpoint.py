"""Single-file checkpoint container: text manifest + raw little-endian payloads.

Layout (all manifest lines are UTF-8, newline-terminated):

    landingcast-checkpoint 1
    meta <nbytes>
    <nbytes of JSON: epoch, best_val_nll, config, norm_stats, optimizer, ...>
    tensors <count>
    <name> <f4|f8> <d0>x<d1>x... <offset> <nbytes>
    end
    <concatenated little-endian payloads>

Offsets are relative to the first payload byte, so `load` can mmap-style
seek. Round-trips are bit-exact: payloads are the raw array bytes and the
JSON is emitted with sorted keys and repr-float precision.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint", "CheckpointFormatError"]

_MAGIC = "landingcast-checkpoint 1"

_DTYPE_CODES = {np.dtype(np.float32): "f4", np.dtype(np.float64): "f8"}


class CheckpointFormatError(ValueError):
    """The file is not a valid checkpoint container."""


def _shape_str(shape: tuple) -> str:
    return "x".join(str(d) for d in shape) if shape else "scalar"


def _parse_shape(text: str) -> tuple:
    return () if text == "scalar" else tuple(int(d) for d in text.split("x"))


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict[str, Any]) -> None:
    """Write `tensors` (name -> float array) plus a JSON `meta` block."""
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    entries = []
    offset = 0
    payloads = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        code = _DTYPE_CODES.get(arr.dtype)
        if code is None:
            raise ValueError(f"tensor '{name}' has unsupported dtype {arr.dtype}")
        if any(ch.isspace() for ch in name):
            raise ValueError(f"tensor name {name!r} may not contain whitespace")
        raw = np.ascontiguousarray(arr).astype(f"<{code}", copy=False).tobytes()
        entries.append(f"{name} {code} {_shape_str(arr.shape)} {offset} {len(raw)}\n")
        payloads.append(raw)
        offset += len(raw)
    with open(path, "wb") as fh:
        fh.write(f"{_MAGIC}\n".encode("utf-8"))
        fh.write(f"meta {len(meta_bytes)}\n".encode("utf-8"))
        fh.write(meta_bytes)
        fh.write(b"\n")
        fh.write(f"tensors {len(entries)}\n".encode("utf-8"))
        for line in entries:
            fh.write(line.encode("utf-8"))
        fh.write(b"end\n")
        for raw in payloads:
            fh.write(raw)


def _read_line(fh) -> str:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise CheckpointFormatError("truncated manifest")
    return line[:-1].decode("utf-8")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """Read a checkpoint back as (tensors, meta); inverse of `save_checkpoint`."""
    with open(path, "rb") as fh:
        if _read_line(fh) != _MAGIC:
            raise CheckpointFormatError(f"{path}: bad magic line")
        tag, _, nbytes = _read_line(fh).partition(" ")
        if tag != "meta":
            raise CheckpointFormatError("expected meta block")
        meta = json.loads(fh.read(int(nbytes)).decode("utf-8"))
        if fh.read(1) != b"\n":
            raise CheckpointFormatError("meta block not newline-terminated")
        tag, _, count = _read_line(fh).partition(" ")
        if tag != "tensors":
            raise CheckpointFormatError("expected tensors block")
        specs = []
        for _ in range(int(count)):
            parts = _read_line(fh).split(" ")
            if len(parts) != 5:
                raise CheckpointFormatError(f"malformed tensor line: {parts}")
            name, code, shape_s, off_s, len_s = parts
            specs.append((name, code, _parse_shape(shape_s), int(off_s), int(len_s)))
        if _read_line(fh) != "end":
            raise CheckpointFormatError("manifest missing end marker")
        base = fh.tell()
        tensors: dict[str, np.ndarray] = {}
        for name, code, shape, off, nbytes in specs:
            fh.seek(base + off)
            raw = fh.read(nbytes)
            if len(raw) != nbytes:
                raise CheckpointFormatError(f"tensor '{name}': payload truncated")
            arr = np.frombuffer(raw, dtype=f"<{code}").reshape(shape)
            tensors[name] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
        return tensors, meta
