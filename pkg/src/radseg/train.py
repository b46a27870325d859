"""Joint training of every stage by minimising the summed multi-stage loss."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from radseg.checkpoint import save_checkpoint
from radseg.errors import InvalidConfig, MissingNormalizer, NonFiniteLoss
from radseg.models import MultiStage, multi_stage_loss
from radseg.nn.losses import LOSSES
from radseg.nn.optim import AdamState, adam_step
from radseg.store import Normalizer, iterate_batches

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-4
    batch_size: int = 8
    window_len: int = 4096
    windows_per_example: int = 2
    loss: str = "bce_logits"
    stage_weights: tuple[float, ...] | None = None
    seed: int = 0
    max_steps: int | None = None
    checkpoint_every: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if isinstance(self.stage_weights, list):
            object.__setattr__(self, "stage_weights", tuple(self.stage_weights))
        self.validate()

    def validate(self):
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.window_len <= 0 or self.window_len % 16:
            raise InvalidConfig("window_len must be a positive multiple of 16")
        if self.batch_size < 1 or self.windows_per_example < 1:
            raise InvalidConfig("batch_size and windows_per_example must be >= 1")
        if self.loss not in LOSSES:
            raise InvalidConfig(f"unknown loss {self.loss!r}")
        if self.lr < 0:
            raise InvalidConfig("lr must be >= 0")
        if self.stage_weights is not None and any(w < 0 for w in self.stage_weights):
            raise InvalidConfig("stage weights must be >= 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["stage_weights"] is not None:
            d["stage_weights"] = list(d["stage_weights"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown train keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    history: list[tuple[int, int, float]] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    optimizer: AdamState | None = None
    steps: int = 0
    epochs_completed: int = 0

    def history_csv(self) -> str:
        lines = ["epoch,step,loss"]
        lines += [f"{e},{s},{v!r}" for e, s, v in self.history]
        return "\n".join(lines) + "\n"


def epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(epoch)]).generate_state(1, dtype=np.uint64)[0] >> 1)


def validation_seed(seed: int) -> int:
    """Fixed window seed for validation, disjoint from every epoch stream."""
    return int(np.random.SeedSequence([int(seed), 0x7A1, 0]).generate_state(1, dtype=np.uint64)[0] >> 1)


def train_step(model: MultiStage, iq: np.ndarray, mask: np.ndarray, optimizer: AdamState,
               weights, kind: str) -> float:
    model.zero_grad()
    outputs = model.forward(iq, train=True)
    total, grads, _ = multi_stage_loss(outputs, mask, weights, kind)
    if not math.isfinite(total):
        return total
    model.backward(grads)
    adam_step(model.parameters(), model.gradients(), optimizer)
    return total


def validation_loss(model: MultiStage, dataset, config: TrainConfig, normalizer: Normalizer) -> float:
    """Mean eval-mode loss over a fixed set of windows (same windows every call)."""
    weights = _weights(model, config)
    total, count = 0.0, 0
    for batch in iterate_batches(dataset, config.batch_size, validation_seed(config.seed), config.window_len,
                                 config.windows_per_example, normalizer):
        outputs = model.forward(batch.iq, train=False)
        value, _, _ = multi_stage_loss(outputs, batch.mask, weights, config.loss)
        total += value * len(batch.indices)
        count += len(batch.indices)
    return total / max(count, 1)


def _weights(model, config):
    weights = config.stage_weights or (1.0,) * model.n_stages
    if len(weights) != model.n_stages:
        raise InvalidConfig(f"{len(weights)} stage weights for {model.n_stages} stages")
    return weights


def train(model: MultiStage, dataset, config: TrainConfig, *, normalizer: Normalizer | None = None,
          out_dir: str | Path | None = None, val_dataset=None, optimizer: AdamState | None = None,
          start_epoch: int = 0, start_step: int = 0, metadata: dict | None = None,
          on_epoch: Callable[[int, float], None] | None = None) -> TrainResult:
    """Train ``model`` in place.

    Epoch ``e`` draws its batch order and windows from ``epoch_seed(seed, e)``,
    so a run is reproduced exactly by its config. With ``out_dir`` set,
    ``final.ckpt`` is always written, ``best.ckpt`` tracks the lowest
    validation loss (or the final epoch without a validation split), and
    ``epoch-XXXX.ckpt`` files appear every ``checkpoint_every`` epochs.
    """
    normalizer = normalizer or getattr(dataset, "normalizer", None)
    if normalizer is None:
        raise MissingNormalizer("training split has no normaliser statistics")
    weights = _weights(model, config)
    if optimizer is None:
        optimizer = AdamState.for_params(model.parameters(), lr=config.lr, beta1=config.beta1,
                                         beta2=config.beta2, eps=config.eps)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    result = TrainResult(optimizer=optimizer)
    step = start_step
    best = math.inf
    meta = {"seed": config.seed, "normalizer": normalizer.to_dict(), "train": config.to_dict(), **(metadata or {})}

    def save(name, epoch):
        if out is not None:
            save_checkpoint(model, out / name, {**meta, "epoch": epoch, "step": step}, optimizer)

    done = False
    for epoch in range(start_epoch, start_epoch + config.epochs):
        losses = []
        for batch in iterate_batches(dataset, config.batch_size, epoch_seed(config.seed, epoch),
                                     config.window_len, config.windows_per_example, normalizer):
            value = train_step(model, batch.iq, batch.mask, optimizer, weights, config.loss)
            if not math.isfinite(value):
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}, step {step}", {
                    "epoch": epoch, "step": step, "loss": repr(value),
                    "indices": batch.indices, "starts": batch.starts,
                })
            step += 1
            losses.append(value)
            result.history.append((epoch, step, value))
            if config.max_steps is not None and step - start_step >= config.max_steps:
                done = True
                break
        mean_loss = float(np.mean(losses))
        result.epoch_losses.append(mean_loss)
        result.epochs_completed = epoch + 1
        log.info("epoch %d: mean loss %.6f", epoch, mean_loss)
        if val_dataset is not None:
            vl = validation_loss(model, val_dataset, config, normalizer)
            result.val_losses.append(vl)
            if vl < best:
                best = vl
                save("best.ckpt", epoch + 1)
        if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            save(f"epoch-{epoch + 1:04d}.ckpt", epoch + 1)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
        if done:
            break
    result.steps = step
    save("final.ckpt", result.epochs_completed)
    if out is not None and val_dataset is None:
        save("best.ckpt", result.epochs_completed)
    return result
