"""Small end-to-end training probes: the overfit check and the desk-scale trend run."""

from __future__ import annotations

import dataclasses
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from radseg.evaluate import EvalReport, ModelPredictor, evaluate
from radseg.models import build_ms_unet
from radseg.store import Dataset, write_dataset
from radseg.synthesis import GenerationConfig, generate
from radseg.train import TrainConfig, train

# 16 examples of one window each, so a full batch is the whole training set
# and every training sample is seen at every step. Pulses start within the
# first 100 us so that every example carries activity inside the window.
OVERFIT_GENERATION = GenerationConfig(n_samples=1024, snr_min_db=20.0, snr_max_db=20.0,
                                      toa_us=(0.0, 100.0), global_seed=7)
OVERFIT_TRAIN = TrainConfig(epochs=200, lr=1e-4, batch_size=16, window_len=1024,
                            windows_per_example=1, max_steps=200, seed=0)
OVERFIT_COUNT = 16


@dataclass
class ProbeResult:
    train_iou: float
    train_f1: float | None
    losses: list[float]
    steps: int
    seconds: float


def overfit_probe(directory: str | Path | None = None, generation: GenerationConfig = OVERFIT_GENERATION,
                  config: TrainConfig = OVERFIT_TRAIN, count: int = OVERFIT_COUNT, base_channels: int = 8,
                  model_seed: int = 0) -> ProbeResult:
    """Train a 1-stage MS-UNet1D on a tiny split and score it on that same split."""
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(directory) if directory is not None else Path(tmp)
        write_dataset(generate(generation, count), root / "train", generation, "train", compute_stats=True)
        ds = Dataset(root / "train")
        model = build_ms_unet(stages=1, seed=model_seed, base_channels=base_channels)
        t0 = time.perf_counter()
        result = train(model, ds, config)
        rep = evaluate(ModelPredictor(model, ds.normalizer, config.window_len), ds)
        seconds = time.perf_counter() - t0
    return ProbeResult(rep.overall("iou"), rep.overall("f1"), [h[2] for h in result.history],
                       result.steps, seconds)


# ------------------------------------------------------------ desk-scale trend

DESK_GENERATION = GenerationConfig(snr_min_db=-10.0, snr_max_db=10.0)
DESK_TRAIN = TrainConfig(epochs=10, lr=1e-4, batch_size=8, window_len=4096, windows_per_example=2)
DESK_COUNTS = {"train": 2000, "test": 200}
DESK_SEEDS = (0, 1, 2)


@dataclass
class DeskResult:
    reports: dict[tuple[int, int], EvalReport]  # (stages, seed) -> report

    def iou(self, stages: int, seed: int, snr_db: float) -> float | None:
        row = self.reports[(stages, seed)].row(float(snr_db))
        return None if row is None else row.mean["iou"]

    def improves_with_snr(self, stages: int, seed: int, low: float = -10.0, high: float = 10.0) -> bool:
        lo, hi = self.iou(stages, seed, low), self.iou(stages, seed, high)
        return lo is not None and hi is not None and hi > lo

    def median_iou(self, stages: int, snr_db: float) -> float:
        vals = [self.iou(stages, s, snr_db) for st, s in self.reports if st == stages]
        return float(np.median([v for v in vals if v is not None]))


def desk_scale(directory: str | Path, stage_counts=(1, 2), seeds=DESK_SEEDS, base_channels: int = 16,
               generation: GenerationConfig = DESK_GENERATION, config: TrainConfig = DESK_TRAIN,
               counts=DESK_COUNTS, log=print) -> DeskResult:
    """Multi-hour CPU benchmark: train each (stages, seed) pair and evaluate on a held-out split."""
    root = Path(directory)
    splits = {}
    for k, (split, n) in enumerate(counts.items()):
        gen = generation.replace(global_seed=generation.global_seed + k)
        if not (root / split / "manifest.json").exists():
            write_dataset(generate(gen, n), root / split, gen, split, compute_stats=(split == "train"))
        splits[split] = Dataset(root / split)
    train_ds, test_ds = splits["train"], splits["test"]
    reports = {}
    for stages in stage_counts:
        for seed in seeds:
            t0 = time.perf_counter()
            model = build_ms_unet(stages=stages, seed=seed, base_channels=base_channels)
            train(model, train_ds, dataclasses.replace(config, seed=seed))
            rep = evaluate(ModelPredictor(model, train_ds.normalizer, config.window_len), test_ds,
                           metadata={"stages": stages, "seed": seed})
            reports[(stages, seed)] = rep
            log(f"stages={stages} seed={seed}: {time.perf_counter() - t0:.0f} s")
    return DeskResult(reports)
