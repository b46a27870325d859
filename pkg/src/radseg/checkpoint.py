"""Checkpoint files ("RSGCKPT1").

Layout: 8 magic bytes, u32 little-endian header length, UTF-8 JSON header,
then raw little-endian float32 arrays concatenated in header order. The header
lists ``{"name", "shape"}`` per entry: trainable parameters in canonical
module order, then batch-norm running statistics, then (optionally) the Adam
first and second moments under ``adam.m.<name>`` / ``adam.v.<name>``.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radseg.errors import CorruptCheckpoint, VersionMismatch
from radseg.models import MultiStage, build_model
from radseg.nn.optim import AdamState

MAGIC = b"RSGCKPT1"
FORMAT_VERSION = 1
_LEN = struct.Struct("<I")


@dataclass
class Checkpoint:
    model: MultiStage
    metadata: dict = field(default_factory=dict)
    optimizer: AdamState | None = None


def _entries(model: MultiStage, optimizer: AdamState | None):
    out = [(name, p) for name, p, _ in model.named_parameters()]
    out += list(model.named_buffers())
    if optimizer is not None and optimizer.m:
        names = [name for name, _, _ in model.named_parameters()]
        out += [(f"adam.m.{n}", m) for n, m in zip(names, optimizer.m)]
        out += [(f"adam.v.{n}", v) for n, v in zip(names, optimizer.v)]
    return out


def save_checkpoint(model: MultiStage, path: str | os.PathLike, metadata: dict | None = None,
                    optimizer: AdamState | None = None):
    entries = _entries(model, optimizer)
    header = {
        "format_version": FORMAT_VERSION,
        "architecture": model.spec,
        "entries": [{"name": n, "shape": list(a.shape)} for n, a in entries],
        "metadata": metadata or {},
        "optimizer": None if optimizer is None else optimizer.hyperparameters(),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_LEN.pack(len(blob)))
        fh.write(blob)
        for _, a in entries:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())
    os.replace(tmp, path)


def read_header(path: str | os.PathLike) -> tuple[dict, int]:
    """Parse the header; returns (header, byte offset of the first array)."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(len(MAGIC) + _LEN.size)
            if len(head) < len(MAGIC) + _LEN.size or head[:len(MAGIC)] != MAGIC:
                raise CorruptCheckpoint(f"{path}: not a checkpoint (bad magic)")
            (n,) = _LEN.unpack(head[len(MAGIC):])
            raw = fh.read(n)
    except OSError as exc:
        raise CorruptCheckpoint(f"{path}: {exc}") from exc
    if len(raw) != n:
        raise CorruptCheckpoint(f"{path}: truncated header")
    try:
        header = json.loads(raw.decode("utf-8"))
    except ValueError as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint version {header.get('format_version')} != {FORMAT_VERSION}")
    return header, len(MAGIC) + _LEN.size + n


def _read_arrays(path, header, offset) -> dict[str, np.ndarray]:
    sizes = [int(np.prod(e["shape"], dtype=np.int64)) for e in header["entries"]]
    expected = offset + 4 * sum(sizes)
    actual = os.path.getsize(path)
    if actual != expected:
        raise CorruptCheckpoint(f"{path}: {actual} bytes, header implies {expected}")
    data = np.fromfile(path, dtype="<f4", offset=offset)
    out = {}
    pos = 0
    for e, size in zip(header["entries"], sizes):
        out[e["name"]] = data[pos:pos + size].reshape(e["shape"]).astype(np.float32)
        pos += size
    return out


def load_checkpoint(path: str | os.PathLike, expected_architecture: dict | None = None) -> Checkpoint:
    header, offset = read_header(path)
    arch = header["architecture"]
    if expected_architecture is not None and arch != expected_architecture:
        raise VersionMismatch(f"checkpoint architecture {arch} does not match {expected_architecture}")
    arrays = _read_arrays(path, header, offset)
    model = build_model(arch, seed=0, dtype=np.float32)
    state = {k: v for k, v in arrays.items() if not k.startswith("adam.")}
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CorruptCheckpoint(f"{path}: {exc}") from exc
    optimizer = None
    hyper = header.get("optimizer")
    if hyper is not None:
        names = [n for n, _, _ in model.named_parameters()]
        optimizer = AdamState(**hyper)
        if f"adam.m.{names[0]}" in arrays:
            optimizer.m = [arrays[f"adam.m.{n}"] for n in names]
            optimizer.v = [arrays[f"adam.v.{n}"] for n in names]
    return Checkpoint(model=model, metadata=header.get("metadata", {}), optimizer=optimizer)


def load_into(model: MultiStage, path: str | os.PathLike) -> dict:
    """Load weights into an existing model; architecture must match exactly."""
    ckpt = load_checkpoint(path, expected_architecture=model.spec)
    model.load_state_dict(ckpt.model.state_dict())
    return ckpt.metadata
