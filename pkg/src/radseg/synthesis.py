"""Synthetic interleaved radar pulse examples with sample-exact masks.

Every example is a pure function of ``(global_seed, index, config)``: the
per-example random stream is seeded from both numbers, so examples can be
rendered in any order or in parallel and still come out bit-identical.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from radseg import codes
from radseg.errors import ChipUnderflow, EmptyMask, InvalidConfig

N_CLASSES = 5


class WaveformClass(enum.IntEnum):
    CPT = 1
    BARKER = 2
    POLYPHASE_BARKER = 3
    FRANK = 4
    LFM = 5

    @property
    def channel(self) -> int:
        """Row of this class in a segmentation mask."""
        return int(self) - 1


CODED_CLASSES = (WaveformClass.BARKER, WaveformClass.POLYPHASE_BARKER, WaveformClass.FRANK)


def round_half_up(x):
    """Nearest-integer rounding with ties away from zero for x >= 0."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class EmitterTruth:
    """Ground-truth parameters of one emitter's pulse train."""

    waveform: WaveformClass
    pw_us: float
    pri_us: float
    toa_us: float
    n_pulses: int
    initial_phase_rad: float
    code_length: int | None = None
    lfm_bandwidth_hz: float | None = None
    lfm_up: bool | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["waveform"] = int(self.waveform)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EmitterTruth":
        d = dict(d)
        d["waveform"] = WaveformClass(d["waveform"])
        return cls(**d)


@dataclass(frozen=True)
class GenerationConfig:
    n_samples: int = 32768
    sample_rate_hz: float = 3.2e6
    snr_min_db: float = -20.0
    snr_max_db: float = 20.0
    snr_step_db: float = 0.5
    n_classes_min: int = 1
    n_classes_max: int = 5
    classes: tuple[int, ...] = (1, 2, 3, 4, 5)
    pw_us: tuple[float, float] = (10.0, 100.0)
    pri_us: tuple[float, float] = (320.0, 5120.0)
    toa_us: tuple[float, float] = (0.0, 5120.0)
    n_pulses: tuple[int, int] = (2, 16)
    lfm_bandwidth_hz: tuple[float, float] = (1e5, 1e6)
    barker_lengths: tuple[int, ...] = tuple(sorted(codes.BARKER))
    polyphase_lengths: tuple[int, ...] = tuple(sorted(codes.POLYPHASE_BARKER))
    frank_orders: tuple[int, ...] = (2, 3, 4)
    # carrier offset is off by default; pure baseband
    frequency_offset_hz: float = 0.0
    global_seed: int = 0

    def __post_init__(self):
        # JSON round trips turn tuples into lists
        for f_ in dataclasses.fields(self):
            v = getattr(self, f_.name)
            if isinstance(v, list):
                object.__setattr__(self, f_.name, tuple(v))
        self.validate()

    @property
    def dt_us(self) -> float:
        return 1e6 / self.sample_rate_hz

    @property
    def snr_grid(self) -> np.ndarray:
        n = self.n_snr_steps
        return self.snr_min_db + self.snr_step_db * np.arange(n + 1)

    @property
    def n_snr_steps(self) -> int:
        span = self.snr_max_db - self.snr_min_db
        if span == 0:
            return 0
        return int(round(span / self.snr_step_db))

    def validate(self):
        if self.n_samples <= 0:
            raise InvalidConfig("n_samples must be positive")
        if self.sample_rate_hz <= 0:
            raise InvalidConfig("sample_rate_hz must be positive")
        if self.snr_max_db < self.snr_min_db:
            raise InvalidConfig("snr_max_db < snr_min_db")
        span = self.snr_max_db - self.snr_min_db
        if span > 0:
            if self.snr_step_db <= 0:
                raise InvalidConfig("snr_step_db must be positive")
            steps = span / self.snr_step_db
            if abs(steps - round(steps)) > 1e-9:
                raise InvalidConfig("snr_step_db must divide the SNR range")
        if not self.classes or any(c not in range(1, N_CLASSES + 1) for c in self.classes):
            raise InvalidConfig(f"bad class list {self.classes}")
        if len(set(self.classes)) != len(self.classes):
            raise InvalidConfig("duplicate classes")
        if not 1 <= self.n_classes_min <= self.n_classes_max <= N_CLASSES:
            raise InvalidConfig("class-count bounds must satisfy 1 <= min <= max <= 5")
        for name in ("pw_us", "pri_us", "toa_us", "n_pulses", "lfm_bandwidth_hz"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise InvalidConfig(f"bad bounds for {name}: {(lo, hi)}")
        if self.pw_us[0] <= 0 or self.n_pulses[0] < 1:
            raise InvalidConfig("pulse width and pulse count must be positive")
        if self.pri_us[0] <= self.pw_us[1]:
            raise InvalidConfig("pri lower bound must exceed pw upper bound")
        bad = [n for n in self.barker_lengths if n not in codes.BARKER]
        bad += [n for n in self.polyphase_lengths if n not in codes.POLYPHASE_BARKER]
        bad += [m for m in self.frank_orders if m not in codes.FRANK_ORDERS]
        if bad:
            raise InvalidConfig(f"code lengths not in the embedded tables: {bad}")
        min_pw = round_half_up(self.pw_us[0] / self.dt_us)
        longest = max(
            max(self.barker_lengths, default=1),
            max(self.polyphase_lengths, default=1),
            max((m * m for m in self.frank_orders), default=1),
        )
        if min_pw < longest:
            raise InvalidConfig("minimum pulse width is shorter than the longest code")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        known = {f_.name for f_ in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown generation keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes) -> "GenerationConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class SignalExample:
    index: int
    iq: np.ndarray  # complex64, (N,)
    mask: np.ndarray  # uint8, (5, N)
    snr_db: float
    emitters: tuple[EmitterTruth, ...] = field(default_factory=tuple)

    def equals(self, other: "SignalExample") -> bool:
        return (
            self.index == other.index
            and self.snr_db == other.snr_db
            and tuple(self.emitters) == tuple(other.emitters)
            and self.iq.dtype == other.iq.dtype
            and np.array_equal(self.iq.view(np.uint8), other.iq.view(np.uint8))
            and np.array_equal(self.mask, other.mask)
        )


def code_sequence(waveform: WaveformClass, length_or_m: int) -> np.ndarray:
    """Chip phases in radians for a coded waveform.

    For Frank codes the argument is the order M and the result has M*M chips.
    """
    waveform = WaveformClass(waveform)
    if waveform is WaveformClass.BARKER:
        return codes.barker_phases(length_or_m)
    if waveform is WaveformClass.POLYPHASE_BARKER:
        return codes.polyphase_barker_phases(length_or_m)
    if waveform is WaveformClass.FRANK:
        return codes.frank_phases(length_or_m)
    raise codes.NoSuchCode(f"{waveform.name} is not a coded waveform")


def _emitter_chips(emitter: EmitterTruth) -> np.ndarray:
    if emitter.waveform is WaveformClass.FRANK:
        m = math.isqrt(emitter.code_length)
        return code_sequence(WaveformClass.FRANK, m)
    return code_sequence(emitter.waveform, emitter.code_length)


def chip_boundaries(pw_samples: int, n_chips: int) -> np.ndarray:
    """Run boundaries round(k * pw / L) for k = 0..L, so the last is exactly pw."""
    k = np.arange(n_chips + 1)
    return np.floor(k * pw_samples / n_chips + 0.5).astype(np.int64)


def sample_emitter_params(rng: np.random.Generator, config: GenerationConfig, waveform) -> EmitterTruth:
    waveform = WaveformClass(waveform)
    pw = float(rng.uniform(*config.pw_us))
    pri = float(rng.uniform(*config.pri_us))
    toa = float(rng.uniform(*config.toa_us))
    n_p = int(rng.integers(config.n_pulses[0], config.n_pulses[1] + 1))
    phase = float(rng.uniform(0.0, 2 * np.pi))
    code_length = bandwidth = up = None
    if waveform is WaveformClass.BARKER:
        code_length = int(rng.choice(config.barker_lengths))
    elif waveform is WaveformClass.POLYPHASE_BARKER:
        code_length = int(rng.choice(config.polyphase_lengths))
    elif waveform is WaveformClass.FRANK:
        code_length = int(rng.choice(config.frank_orders)) ** 2
    elif waveform is WaveformClass.LFM:
        bandwidth = float(rng.uniform(*config.lfm_bandwidth_hz))
        up = bool(rng.integers(0, 2))
    return EmitterTruth(
        waveform=waveform,
        pw_us=pw,
        pri_us=pri,
        toa_us=toa,
        n_pulses=n_p,
        initial_phase_rad=phase,
        code_length=code_length,
        lfm_bandwidth_hz=bandwidth,
        lfm_up=up,
    )


def synth_pulse_iq(emitter: EmitterTruth, pw_samples: int, sample_rate_hz: float,
                   frequency_offset_hz: float = 0.0) -> np.ndarray:
    """One unit-magnitude pulse of ``pw_samples`` complex samples."""
    phi0 = emitter.initial_phase_rad
    w = emitter.waveform
    if w is WaveformClass.CPT:
        phase = np.full(pw_samples, phi0)
    elif w in CODED_CLASSES:
        chips = _emitter_chips(emitter)
        if pw_samples < len(chips):
            raise ChipUnderflow(f"{pw_samples} samples cannot hold {len(chips)} chips")
        bounds = chip_boundaries(pw_samples, len(chips))
        phase = np.repeat(chips, np.diff(bounds)) + phi0
    elif w is WaveformClass.LFM:
        b = emitter.lfm_bandwidth_hz
        t = np.arange(pw_samples) / sample_rate_hz
        duration = pw_samples / sample_rate_hz
        sweep = 2 * np.pi * (-0.5 * b * t + 0.5 * (b / duration) * t * t)
        phase = (sweep if emitter.lfm_up else -sweep) + phi0
    else:  # pragma: no cover - enum is closed
        raise ValueError(w)
    if frequency_offset_hz:
        phase = phase + 2 * np.pi * frequency_offset_hz * np.arange(pw_samples) / sample_rate_hz
    return np.exp(1j * phase)


def pulse_extents(emitter: EmitterTruth, n_samples: int, sample_rate_hz: float) -> list[tuple[int, int]]:
    """Sample intervals [start, stop) covered by each pulse, truncated at N."""
    scale = sample_rate_hz * 1e-6
    width = round_half_up(emitter.pw_us * scale)
    out = []
    for k in range(emitter.n_pulses):
        start = round_half_up((emitter.toa_us + k * emitter.pri_us) * scale)
        if start >= n_samples:
            break
        out.append((start, min(start + width, n_samples)))
    return out


def render_clean(emitters: Sequence[EmitterTruth], config: GenerationConfig) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free baseband signal (complex128) and mask for a set of emitters."""
    n = config.n_samples
    fs = config.sample_rate_hz
    clean = np.zeros(n, dtype=np.complex128)
    mask = np.zeros((N_CLASSES, n), dtype=np.uint8)
    for em in emitters:
        width = round_half_up(em.pw_us * fs * 1e-6)
        pulse = synth_pulse_iq(em, width, fs, config.frequency_offset_hz)
        for start, stop in pulse_extents(em, n, fs):
            clean[start:stop] += pulse[: stop - start]
            mask[em.waveform.channel, start:stop] = 1
    return clean, mask


def _example_streams(global_seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    ss = np.random.SeedSequence([int(global_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    params_ss, noise_ss = ss.spawn(2)
    return np.random.default_rng(params_ss), np.random.default_rng(noise_ss)


def draw_emitters(rng: np.random.Generator, config: GenerationConfig) -> tuple[float, tuple[EmitterTruth, ...]]:
    snr = float(config.snr_min_db + config.snr_step_db * rng.integers(0, config.n_snr_steps + 1))
    hi = min(config.n_classes_max, len(config.classes))
    lo = min(config.n_classes_min, hi)
    n_c = int(rng.integers(lo, hi + 1))
    picked = sorted(int(c) for c in rng.choice(config.classes, size=n_c, replace=False))
    emitters = tuple(sample_emitter_params(rng, config, c) for c in picked)
    return snr, emitters


def add_awgn(clean: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian noise with total variance 10^(-snr/10)."""
    sigma = math.sqrt(10.0 ** (-snr_db / 10.0) / 2.0)
    noise = rng.standard_normal((2, clean.shape[0]))
    return clean + sigma * (noise[0] + 1j * noise[1])


def render_example(global_seed: int, index: int, config: GenerationConfig) -> SignalExample:
    params_rng, noise_rng = _example_streams(global_seed, index)
    snr, emitters = draw_emitters(params_rng, config)
    clean, mask = render_clean(emitters, config)
    noisy = add_awgn(clean, snr, noise_rng).astype(np.complex64)
    return SignalExample(index=index, iq=noisy, mask=mask, snr_db=snr, emitters=emitters)


def _render_star(args):
    return render_example(*args)


def generate(config: GenerationConfig, count: int, start: int = 0, jobs: int = 1) -> Iterator[SignalExample]:
    """Yield examples ``start .. start+count-1`` in index order."""
    args = ((config.global_seed, i, config) for i in range(start, start + count))
    if jobs <= 1:
        for a in args:
            yield _render_star(a)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_render_star, args, chunksize=8)


def measure_snr(clean: np.ndarray, noisy: np.ndarray, mask_union: np.ndarray) -> float:
    """SNR in dB from pulse-on clean power over the empirical noise variance."""
    clean = np.asarray(clean, dtype=np.complex128)
    noisy = np.asarray(noisy, dtype=np.complex128)
    on = np.asarray(mask_union, dtype=bool)
    if clean.shape != noisy.shape or on.shape != clean.shape:
        raise ValueError("clean, noisy and mask must have equal length")
    if not on.any():
        raise EmptyMask("no pulse-on samples")
    signal_power = float(np.mean(np.abs(clean[on]) ** 2))
    noise_var = float(np.var(noisy - clean))
    if noise_var == 0.0:
        return math.inf
    return 10.0 * math.log10(signal_power / noise_var)


def union_mask(mask: np.ndarray) -> np.ndarray:
    return mask.any(axis=0)


def summarize(examples: Iterable[SignalExample]) -> dict:
    """Per-class and per-SNR counts for a batch of examples."""
    per_class = {w.name: 0 for w in WaveformClass}
    per_snr: dict[float, int] = {}
    total = 0
    for ex in examples:
        total += 1
        for em in ex.emitters:
            per_class[em.waveform.name] += 1
        per_snr[ex.snr_db] = per_snr.get(ex.snr_db, 0) + 1
    return {"count": total, "per_class": per_class, "per_snr": dict(sorted(per_snr.items()))}
