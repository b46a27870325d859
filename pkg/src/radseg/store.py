"""On-disk dataset format, normalisation statistics, and windowed batches.

Layout of one split directory::

    manifest.json        UTF-8 JSON, see ``DatasetManifest``
    shard-00000.rsgd     magic b"RSGD1\\0" followed by fixed-size records

Each record is ``u32 index, f32 snr_db, u32 n_samples``, then ``n_samples``
little-endian f32 (I, Q) pairs, then the 5 x N mask packed LSB-first per
channel into ``ceil(N/8)`` bytes, channels in class order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from radseg.errors import (
    CorruptShard,
    EmptySplit,
    IndexGap,
    IoFailure,
    LengthMismatch,
    MissingNormalizer,
    OutOfRange,
    WindowTooLong,
)
from radseg.synthesis import N_CLASSES, EmitterTruth, GenerationConfig, SignalExample

FORMAT_VERSION = "1"
MAGIC = b"RSGD1\x00"
MANIFEST_NAME = "manifest.json"
HEADER = struct.Struct("<IfI")
VAR_FLOOR = 1e-12
DEFAULT_SHARD_SIZE = 1024


def mask_nbytes(n_samples: int) -> int:
    return N_CLASSES * math.ceil(n_samples / 8)


def record_nbytes(n_samples: int) -> int:
    return HEADER.size + 8 * n_samples + mask_nbytes(n_samples)


def pack_mask(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits)
    if bits.ndim != 2 or bits.shape[1] == 0:
        raise LengthMismatch(f"mask must be (channels, N>0), got {bits.shape}")
    return np.packbits(bits.astype(bool), axis=1, bitorder="little").tobytes()


def unpack_mask(buf: bytes, n_samples: int, channels: int = N_CLASSES) -> np.ndarray:
    row = math.ceil(n_samples / 8)
    if n_samples <= 0 or len(buf) != channels * row:
        raise LengthMismatch(f"expected {channels * row} mask bytes for N={n_samples}, got {len(buf)}")
    packed = np.frombuffer(buf, dtype=np.uint8).reshape(channels, row)
    return np.unpackbits(packed, axis=1, count=n_samples, bitorder="little")


def encode_example(ex: SignalExample) -> bytes:
    n = ex.iq.shape[0]
    iq = np.empty((n, 2), dtype="<f4")
    iq[:, 0] = ex.iq.real
    iq[:, 1] = ex.iq.imag
    return HEADER.pack(ex.index, ex.snr_db, n) + iq.tobytes() + pack_mask(ex.mask)


def decode_record(buf: bytes, n_samples: int) -> tuple[int, float, np.ndarray, np.ndarray]:
    if len(buf) != record_nbytes(n_samples):
        raise CorruptShard("truncated record")
    index, snr, n = HEADER.unpack_from(buf)
    if n != n_samples:
        raise CorruptShard(f"record claims {n} samples, manifest says {n_samples}")
    off = HEADER.size
    iq = np.frombuffer(buf, dtype="<f4", count=2 * n, offset=off).reshape(n, 2)
    z = np.empty(n, dtype=np.complex64)
    z.real = iq[:, 0]
    z.imag = iq[:, 1]
    mask = unpack_mask(buf[off + 8 * n:], n)
    return index, float(snr), z, mask


@dataclass(frozen=True)
class Normalizer:
    mean_i: float
    mean_q: float
    var_i: float
    var_q: float

    def apply(self, iq: np.ndarray) -> np.ndarray:
        """Standardise complex samples into a (2, L) float32 array."""
        out = np.empty((2, iq.shape[-1]), dtype=np.float32)
        out[0] = (iq.real.astype(np.float64) - self.mean_i) / math.sqrt(self.var_i)
        out[1] = (iq.imag.astype(np.float64) - self.mean_q) / math.sqrt(self.var_q)
        return out

    def to_dict(self) -> dict:
        return {"mean_i": self.mean_i, "mean_q": self.mean_q, "var_i": self.var_i, "var_q": self.var_q}

    @classmethod
    def from_dict(cls, d: dict | None) -> "Normalizer | None":
        if d is None:
            return None
        return cls(float(d["mean_i"]), float(d["mean_q"]), float(d["var_i"]), float(d["var_q"]))


class NormalizerAccumulator:
    """Streaming population mean/variance, merged per example (Chan et al.)."""

    def __init__(self):
        self.count = 0
        self.mean = np.zeros(2)
        self.m2 = np.zeros(2)

    def update(self, iq: np.ndarray):
        x = np.stack([iq.real, iq.imag]).astype(np.float64)
        n_b = x.shape[1]
        if n_b == 0:
            return
        mean_b = x.mean(axis=1)
        m2_b = ((x - mean_b[:, None]) ** 2).sum(axis=1)
        n_a = self.count
        total = n_a + n_b
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (n_b / total)
        self.m2 = self.m2 + m2_b + delta ** 2 * (n_a * n_b / total)
        self.count = total

    def result(self) -> Normalizer:
        if self.count == 0:
            raise EmptySplit("no samples to compute statistics from")
        var = np.maximum(self.m2 / self.count, VAR_FLOOR)
        return Normalizer(float(self.mean[0]), float(self.mean[1]), float(var[0]), float(var[1]))


def compute_normalizer(examples: Iterable[SignalExample]) -> Normalizer:
    acc = NormalizerAccumulator()
    for ex in examples:
        acc.update(ex.iq)
    return acc.result()


@dataclass
class DatasetManifest:
    split: str
    n_samples: int
    sample_rate_hz: float
    generation: dict
    count: int = 0
    shards: list[dict] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    normalizer: Normalizer | None = None
    format_version: str = FORMAT_VERSION

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "split": self.split,
            "count": self.count,
            "n_samples": self.n_samples,
            "sample_rate_hz": self.sample_rate_hz,
            "generation": self.generation,
            "normalizer": None if self.normalizer is None else self.normalizer.to_dict(),
            "shards": self.shards,
            "records": self.records,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise CorruptShard(f"unsupported manifest version {doc.get('format_version')!r}")
        return cls(
            split=doc["split"],
            n_samples=int(doc["n_samples"]),
            sample_rate_hz=float(doc["sample_rate_hz"]),
            generation=doc["generation"],
            count=int(doc["count"]),
            shards=doc["shards"],
            records=doc["records"],
            normalizer=Normalizer.from_dict(doc["normalizer"]),
        )

    def emitters(self, index: int) -> tuple[EmitterTruth, ...]:
        return tuple(EmitterTruth.from_dict(e) for e in self.records[index]["emitters"])

    def snr_db(self, index: int) -> float:
        return float(self.records[index]["snr_db"])


def _shard_name(k: int) -> str:
    return f"shard-{k:05d}.rsgd"


def write_dataset(
    examples: Iterable[SignalExample],
    directory: str | os.PathLike,
    config: GenerationConfig,
    split: str,
    *,
    shard_size: int = DEFAULT_SHARD_SIZE,
    compute_stats: bool = False,
    normalizer: Normalizer | None = None,
) -> DatasetManifest:
    """Write an index-ordered example stream as shards plus a manifest.

    With ``compute_stats`` the population I/Q statistics are accumulated while
    writing and embedded in the manifest (use this for the training split).
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    n = config.n_samples
    manifest = DatasetManifest(split=split, n_samples=n, sample_rate_hz=config.sample_rate_hz,
                               generation=config.to_dict())
    acc = NormalizerAccumulator() if compute_stats else None
    shard_k = 0
    fh = None
    digest = None
    in_shard = 0

    def close_shard():
        nonlocal fh
        if fh is None:
            return
        fh.close()
        manifest.shards.append({
            "file": _shard_name(shard_k),
            "first_index": manifest.count - in_shard,
            "count": in_shard,
            "bytes": len(MAGIC) + in_shard * record_nbytes(n),
            "sha256": digest.hexdigest(),
        })
        fh = None

    def open_shard():
        nonlocal fh, digest, in_shard
        fh = open(directory / _shard_name(shard_k), "wb")
        digest = hashlib.sha256(MAGIC)
        fh.write(MAGIC)
        in_shard = 0

    try:
        for ex in examples:
            if ex.index != manifest.count:
                raise IndexGap(f"expected index {manifest.count}, got {ex.index}")
            if ex.iq.shape != (n,) or ex.mask.shape != (N_CLASSES, n):
                raise LengthMismatch(f"example {ex.index} does not have N={n}")
            if fh is None:
                open_shard()
            rec = encode_example(ex)
            fh.write(rec)
            digest.update(rec)
            in_shard += 1
            manifest.count += 1
            manifest.records.append({
                "index": ex.index,
                "snr_db": float(np.float32(ex.snr_db)),
                "emitters": [e.to_dict() for e in ex.emitters],
            })
            if acc is not None:
                acc.update(ex.iq)
            if in_shard == shard_size:
                close_shard()
                shard_k += 1
        if manifest.count == 0:
            # an empty split still gets one magic-only shard
            open_shard()
        close_shard()
        if acc is not None and manifest.count:
            manifest.normalizer = acc.result()
        elif normalizer is not None:
            manifest.normalizer = normalizer
        (directory / MANIFEST_NAME).write_text(manifest.to_json(), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    finally:
        if fh is not None:
            fh.close()
    return manifest


class Dataset:
    """Read-only view of one split directory."""

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        try:
            text = (self.directory / MANIFEST_NAME).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read manifest in {self.directory}: {exc}") from exc
        self.manifest = DatasetManifest.from_json(text)
        self._record_size = record_nbytes(self.manifest.n_samples)
        self._verified: set[str] = set()

    def __len__(self) -> int:
        return self.manifest.count

    @property
    def normalizer(self) -> Normalizer | None:
        return self.manifest.normalizer

    @property
    def n_samples(self) -> int:
        return self.manifest.n_samples

    def _locate(self, index: int) -> tuple[dict, int]:
        for shard in self.manifest.shards:
            if shard["first_index"] <= index < shard["first_index"] + shard["count"]:
                return shard, index - shard["first_index"]
        raise CorruptShard(f"no shard holds index {index}")

    def _check_shard(self, path: Path, shard: dict):
        if shard["file"] in self._verified:
            return
        try:
            size = path.stat().st_size
            with open(path, "rb") as fh:
                magic = fh.read(len(MAGIC))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        if magic != MAGIC:
            raise CorruptShard(f"{path.name}: bad magic")
        if size != shard["bytes"]:
            raise CorruptShard(f"{path.name}: {size} bytes, manifest says {shard['bytes']}")
        self._verified.add(shard["file"])

    def read_example(self, index: int) -> SignalExample:
        if not 0 <= index < len(self):
            raise OutOfRange(f"index {index} outside [0, {len(self)})")
        shard, local = self._locate(index)
        path = self.directory / shard["file"]
        self._check_shard(path, shard)
        try:
            with open(path, "rb") as fh:
                fh.seek(len(MAGIC) + local * self._record_size)
                buf = fh.read(self._record_size)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        got, snr, iq, mask = decode_record(buf, self.n_samples)
        if got != index:
            raise CorruptShard(f"record at slot {index} carries index {got}")
        return SignalExample(index=index, iq=iq, mask=mask, snr_db=snr,
                             emitters=self.manifest.emitters(index))

    __getitem__ = read_example

    def __iter__(self) -> Iterator[SignalExample]:
        for i in range(len(self)):
            yield self.read_example(i)


def read_example(directory: str | os.PathLike, index: int) -> SignalExample:
    return Dataset(directory).read_example(index)


def reconstruct_mask(emitters: Sequence[EmitterTruth], n_samples: int, sample_rate_hz: float) -> np.ndarray:
    """Rebuild a 5 x N mask from emitter truths alone.

    Deliberately shares no code with the generator: pulse edges go into a
    difference array and the occupancy comes out of a cumulative sum.
    """
    scale = sample_rate_hz * 1e-6
    mask = np.zeros((N_CLASSES, n_samples), dtype=np.uint8)
    for em in emitters:
        k = np.arange(em.n_pulses, dtype=np.float64)
        starts = np.floor((em.toa_us + k * em.pri_us) * scale + 0.5).astype(np.int64)
        width = int(np.floor(em.pw_us * scale + 0.5))
        starts = starts[starts < n_samples]
        stops = np.minimum(starts + width, n_samples)
        edges = np.zeros(n_samples + 1, dtype=np.int64)
        np.add.at(edges, starts, 1)
        np.add.at(edges, stops, -1)
        occupied = np.cumsum(edges[:-1]) > 0
        mask[int(em.waveform) - 1] |= occupied.astype(np.uint8)
    return mask


@dataclass
class WindowSample:
    iq_window: np.ndarray  # float32 (2, W), standardised
    mask_window: np.ndarray  # uint8 (5, W)
    source_index: int
    start: int


def sample_windows(example: SignalExample, rng: np.random.Generator, window_len: int, count: int,
                   normalizer: Normalizer) -> list[WindowSample]:
    n = example.iq.shape[0]
    if window_len > n:
        raise WindowTooLong(f"window {window_len} longer than signal {n}")
    if window_len <= 0 or window_len % 16:
        raise WindowTooLong(f"window length {window_len} must be a positive multiple of 16")
    starts = rng.integers(0, n - window_len + 1, size=count)
    out = []
    for s in starts:
        s = int(s)
        iq = normalizer.apply(example.iq[s:s + window_len])
        out.append(WindowSample(iq, example.mask[:, s:s + window_len], example.index, s))
    return out


@dataclass
class Batch:
    iq: np.ndarray  # float32 (B, 2, W)
    mask: np.ndarray  # float32 (B, 5, W)
    indices: list[int]
    starts: list[int]


def iterate_batches(dataset, batch_size: int, epoch_seed: int, window_len: int,
                    windows_per_example: int = 2, normalizer: Normalizer | None = None) -> Iterator[Batch]:
    """Deterministic batches for one epoch.

    ``dataset`` is anything indexable that returns ``SignalExample``. Each batch
    holds ``batch_size`` examples (the last may be short), each contributing
    ``windows_per_example`` windows.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    normalizer = normalizer or getattr(dataset, "normalizer", None)
    if normalizer is None:
        raise MissingNormalizer("batches need normaliser statistics")
    order = np.random.default_rng([epoch_seed, 0x5EED]).permutation(len(dataset))
    for b in range(0, len(order), batch_size):
        windows: list[WindowSample] = []
        for idx in order[b:b + batch_size]:
            ex = dataset[int(idx)]
            rng = np.random.default_rng([epoch_seed, int(idx)])
            windows.extend(sample_windows(ex, rng, window_len, windows_per_example, normalizer))
        yield Batch(
            iq=np.stack([w.iq_window for w in windows]),
            mask=np.stack([w.mask_window for w in windows]).astype(np.float32),
            indices=[w.source_index for w in windows],
            starts=[w.start for w in windows],
        )
