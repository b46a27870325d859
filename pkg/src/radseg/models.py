"""UNet1D, the dilated TCN, and the multi-stage wrapper that stacks them.

Stages share an architecture but never parameters. Stage 0 sees the
standardised IQ window; each later stage sees the previous stage's sigmoid
probabilities (or raw logits with ``refine_input="logits"``). Models output
logits; no terminal activation is applied.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from radseg.errors import BadLength, InvalidConfig, ShapeMismatch
from radseg.nn import layers as L
from radseg.nn.losses import loss as loss_fn
from radseg.nn.module import Module


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 2
    out_channels: int = 5
    base_channels: int = 64
    depth: int = 5

    def validate(self):
        if self.base_channels < 1 or self.in_channels < 1 or self.out_channels < 1:
            raise InvalidConfig("channel counts must be >= 1")
        if self.depth < 1:
            raise InvalidConfig("depth must be >= 1")

    @property
    def length_multiple(self) -> int:
        return 2 ** (self.depth - 1)


@dataclass(frozen=True)
class TcnConfig:
    in_channels: int = 2
    out_channels: int = 5
    width: int = 512
    layers: int = 10
    kernel: int = 3

    def validate(self):
        if self.width < 1 or self.layers < 1:
            raise InvalidConfig("width and layers must be >= 1")
        if self.kernel != 3:
            raise InvalidConfig("dilated layers use kernel 3")

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.layers, self.kernel)


def receptive_field(layers: int, kernel: int = 3) -> int:
    """Samples seen by one stage of stacked dilations 1, 2, ..., 2^(layers-1)."""
    return (kernel - 1) * (2 ** layers - 1) + 1


def stage_rng(seed: int, stage: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stage)])


class ConvBlock(Module):
    """Two rounds of conv3 -> batch norm -> ReLU."""

    def __init__(self, cin: int, cout: int, rng, dtype):
        super().__init__()
        self.seq = L.Sequential(
            L.Conv1d(cin, cout, 3, rng=rng, dtype=dtype), L.BatchNorm1d(cout, dtype=dtype), L.ReLU(),
            L.Conv1d(cout, cout, 3, rng=rng, dtype=dtype), L.BatchNorm1d(cout, dtype=dtype), L.ReLU(),
        )

    def children(self):
        return [("conv", self.seq)]

    def forward(self, x, train=True):
        return self.seq.forward(x, train)

    def backward(self, g):
        return self.seq.backward(g)


class UNet1D(Module):
    def __init__(self, config: UNetConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        config.validate()
        self.config = config
        b = config.base_channels
        widths = [b * 2 ** level for level in range(config.depth)]
        self.encoders = []
        cin = config.in_channels
        for w in widths[:-1]:
            self.encoders.append(ConvBlock(cin, w, rng, dtype))
            cin = w
        self.pools = [L.MaxPool1d() for _ in widths[:-1]]
        self.bottleneck = ConvBlock(cin, widths[-1], rng, dtype)
        self.ups = []
        self.decoders = []
        for w in reversed(widths[:-1]):
            self.ups.append(L.ConvTranspose1d(2 * w, w, rng=rng, dtype=dtype))
            self.decoders.append(ConvBlock(2 * w, w, rng, dtype))
        self.head = L.Conv1d(b, config.out_channels, 1, rng=rng, dtype=dtype)
        self._skip_channels = []

    def children(self):
        out = [(f"enc{i}", m) for i, m in enumerate(self.encoders)]
        out.append(("bottleneck", self.bottleneck))
        for i, (u, d) in enumerate(zip(self.ups, self.decoders)):
            out += [(f"up{i}", u), (f"dec{i}", d)]
        out.append(("head", self.head))
        return out

    def check_length(self, n: int):
        m = self.config.length_multiple
        if n % m:
            raise BadLength(f"length {n} is not divisible by {m}")

    def forward(self, x, train=True):
        if x.ndim != 3 or x.shape[1] != self.config.in_channels:
            raise ShapeMismatch(f"expected (B, {self.config.in_channels}, L), got {x.shape}")
        self.check_length(x.shape[2])
        skips = []
        h = x
        for enc, pool in zip(self.encoders, self.pools):
            h = enc.forward(h, train)
            skips.append(h)
            h = pool.forward(h, train)
        h = self.bottleneck.forward(h, train)
        for up, dec, skip in zip(self.ups, self.decoders, reversed(skips)):
            h = L.concat_channels(up.forward(h, train), skip)
            h = dec.forward(h, train)
        return self.head.forward(h, train)

    def backward(self, g):
        g = self.head.backward(g)
        skip_grads = []
        for up, dec in zip(reversed(self.ups), reversed(self.decoders)):
            g = dec.backward(g)
            g_up, g_skip = L.split_channels(g, up.out_channels)
            skip_grads.append(g_skip)
            g = up.backward(g_up)
        g = self.bottleneck.backward(g)
        # skip_grads is ordered shallow -> deep after the reversed walk
        for enc, pool, g_skip in zip(reversed(self.encoders), reversed(self.pools), reversed(skip_grads)):
            g = enc.backward(pool.backward(g) + g_skip)
        return g


class DilatedResidual(Module):
    """x + conv1x1(relu(dilated conv3(x)))."""

    def __init__(self, width: int, dilation: int, rng, dtype):
        super().__init__()
        self.dilated = L.Conv1d(width, width, 3, dilation=dilation, rng=rng, dtype=dtype)
        self.relu = L.ReLU()
        self.pointwise = L.Conv1d(width, width, 1, rng=rng, dtype=dtype)

    def children(self):
        return [("dilated", self.dilated), ("pointwise", self.pointwise)]

    def forward(self, x, train=True):
        return x + self.pointwise.forward(self.relu.forward(self.dilated.forward(x, train), train), train)

    def backward(self, g):
        return g + self.dilated.backward(self.relu.backward(self.pointwise.backward(g)))


class TCN(Module):
    def __init__(self, config: TcnConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        config.validate()
        self.config = config
        self.stem = L.Conv1d(config.in_channels, config.width, 1, rng=rng, dtype=dtype)
        self.blocks = [DilatedResidual(config.width, 2 ** i, rng, dtype) for i in range(config.layers)]
        self.head = L.Conv1d(config.width, config.out_channels, 1, rng=rng, dtype=dtype)

    def children(self):
        return [("stem", self.stem)] + [(f"block{i}", b) for i, b in enumerate(self.blocks)] + [("head", self.head)]

    def check_length(self, n: int):
        if n < 1:
            raise BadLength("empty input")

    def forward(self, x, train=True):
        h = self.stem.forward(x, train)
        for block in self.blocks:
            h = block.forward(h, train)
        return self.head.forward(h, train)

    def backward(self, g):
        g = self.head.backward(g)
        for block in reversed(self.blocks):
            g = block.backward(g)
        return self.stem.backward(g)


class MultiStage(Module):
    """Sequential stack of stage networks, each refining the previous mask."""

    def __init__(self, stages: list[Module], refine_input: str = "probabilities", spec: dict | None = None):
        super().__init__()
        if not stages:
            raise InvalidConfig("need at least one stage")
        if refine_input not in ("probabilities", "logits"):
            raise InvalidConfig(f"refine_input must be 'probabilities' or 'logits', not {refine_input!r}")
        self.stages = stages
        self.refine_input = refine_input
        self.spec = spec or {}
        self._probs: list[np.ndarray] = []

    def children(self):
        return [(f"stage{i}", s) for i, s in enumerate(self.stages)]

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def check_length(self, n: int):
        self.stages[0].check_length(n)

    def forward(self, x, train=True) -> list[np.ndarray]:
        outputs = []
        probs = []
        h = x
        for i, stage in enumerate(self.stages):
            if i > 0:
                if self.refine_input == "probabilities":
                    p = L.sigmoid(outputs[-1])
                    probs.append(p)
                    h = p
                else:
                    h = outputs[-1]
            outputs.append(stage.forward(h, train))
        if train:
            self._probs = probs
        return outputs

    def backward(self, stage_grads: list[np.ndarray]) -> np.ndarray:
        if len(stage_grads) != len(self.stages):
            raise ShapeMismatch("one gradient per stage output is required")
        carry = None
        for i in reversed(range(len(self.stages))):
            g = stage_grads[i] if carry is None else stage_grads[i] + carry
            carry = self.stages[i].backward(g)
            if i > 0 and self.refine_input == "probabilities":
                p = self._probs[i - 1]
                carry = carry * p * (1 - p)
        return carry

    def predict_logits(self, x) -> np.ndarray:
        """Eval-mode logits of the last stage."""
        return self.forward(x, train=False)[-1]


def multi_stage_loss(stage_logits: list[np.ndarray], target: np.ndarray, weights=None,
                     kind: str = "bce_logits") -> tuple[float, list[np.ndarray], list[float]]:
    """Weighted sum of per-stage losses.

    Returns ``(total, per-stage gradients, per-stage loss values)``.
    """
    weights = [1.0] * len(stage_logits) if weights is None else list(weights)
    if len(weights) != len(stage_logits):
        raise ShapeMismatch(f"{len(weights)} weights for {len(stage_logits)} stages")
    total = 0.0
    grads = []
    values = []
    for w, z in zip(weights, stage_logits):
        value, g = loss_fn(kind, z, target)
        values.append(value)
        total += w * value
        grads.append((w * g).astype(z.dtype, copy=False))
    return total, grads, values


# ---------------------------------------------------------------- builders

ARCHITECTURES: dict[str, Callable[..., MultiStage]] = {}


def register_architecture(name: str):
    """Decorator adding a builder ``(spec, seed, dtype) -> MultiStage``.

    Extension point for further stage types (for example dual-dilated layers).
    """
    def deco(fn):
        ARCHITECTURES[name] = fn
        return fn
    return deco


def build_unet1d(config: UNetConfig, seed: int = 0, dtype=np.float32) -> UNet1D:
    return UNet1D(config, stage_rng(seed, 0), dtype)


def build_tcn(config: TcnConfig, seed: int = 0, dtype=np.float32) -> TCN:
    return TCN(config, stage_rng(seed, 0), dtype)


def _stage_configs(base, stages: int):
    refine = dataclasses.replace(base, in_channels=base.out_channels)
    return [base] + [refine] * (stages - 1)


@register_architecture("ms_unet1d")
def _build_ms_unet(spec: dict, seed: int, dtype) -> MultiStage:
    cfg = UNetConfig(**spec.get("unet", {}))
    stages = int(spec.get("stages", 1))
    if stages < 1:
        raise InvalidConfig("stages must be >= 1")
    nets = [UNet1D(c, stage_rng(seed, i), dtype) for i, c in enumerate(_stage_configs(cfg, stages))]
    return MultiStage(nets, spec.get("refine_input", "probabilities"), spec)


@register_architecture("ms_tcn")
def _build_ms_tcn(spec: dict, seed: int, dtype) -> MultiStage:
    cfg = TcnConfig(**spec.get("tcn", {}))
    stages = int(spec.get("stages", 1))
    if stages < 1:
        raise InvalidConfig("stages must be >= 1")
    nets = [TCN(c, stage_rng(seed, i), dtype) for i, c in enumerate(_stage_configs(cfg, stages))]
    return MultiStage(nets, spec.get("refine_input", "probabilities"), spec)


def model_spec(arch: str = "ms_unet1d", stages: int = 1, refine_input: str = "probabilities",
               **arch_config) -> dict:
    """Canonical architecture description stored in checkpoints."""
    if arch == "ms_unet1d":
        sub = {"unet": dataclasses.asdict(UNetConfig(**arch_config))}
    elif arch == "ms_tcn":
        sub = {"tcn": dataclasses.asdict(TcnConfig(**arch_config))}
    else:
        sub = dict(arch_config)
    return {"arch": arch, "stages": int(stages), "refine_input": refine_input, **sub}


def build_model(spec: dict, seed: int = 0, dtype=np.float32) -> MultiStage:
    try:
        builder = ARCHITECTURES[spec["arch"]]
    except KeyError:
        raise InvalidConfig(f"unknown architecture {spec.get('arch')!r}; known: {sorted(ARCHITECTURES)}") from None
    try:
        model = builder(spec, seed, dtype)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc
    model.spec = spec
    return model


def build_ms_unet(stages: int = 1, seed: int = 0, dtype=np.float32, refine_input="probabilities",
                  **unet_config) -> MultiStage:
    return build_model(model_spec("ms_unet1d", stages, refine_input, **unet_config), seed, dtype)


def build_ms_tcn(stages: int = 1, seed: int = 0, dtype=np.float32, refine_input="probabilities",
                 **tcn_config) -> MultiStage:
    return build_model(model_spec("ms_tcn", stages, refine_input, **tcn_config), seed, dtype)


def unet_parameter_count(config: UNetConfig) -> int:
    """Closed-form trainable parameter count of one UNet1D stage."""
    b, cin, cout = config.base_channels, config.in_channels, config.out_channels
    widths = [b * 2 ** level for level in range(config.depth)]

    def block(ci, co):
        return (ci * co * 3 + co) + 2 * co + (co * co * 3 + co) + 2 * co

    total = 0
    for w in widths[:-1]:
        total += block(cin, w)
        cin = w
    total += block(cin, widths[-1])
    for w in widths[:-1]:
        total += (2 * w * w * 2 + w) + block(2 * w, w)
    return total + b * cout + cout
