"""SNR-binned evaluation of predictors over a dataset split."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Protocol

import numpy as np

from radseg.errors import MissingNormalizer, WindowTooLong
from radseg.metrics import THRESHOLD, binarize, example_scores
from radseg.nn.layers import sigmoid
from radseg.store import Normalizer
from radseg.synthesis import SignalExample

TABLE_SNRS = (-20.0, -15.0, -10.0, -5.0)
METRICS = ("f1", "dice", "iou")


class Predictor(Protocol):
    def predict(self, example: SignalExample) -> np.ndarray:
        """Per-sample probabilities, shape (5, N)."""


def tile_starts(n: int, window: int) -> list[int]:
    """Non-overlapping tiles covering [0, n); the last one is right-aligned."""
    if window > n:
        raise WindowTooLong(f"window {window} longer than signal {n}")
    starts = list(range(0, n - window + 1, window))
    if starts[-1] + window < n:
        starts.append(n - window)
    return starts


class ModelPredictor:
    """Runs a multi-stage model in eval mode over tiled, standardised windows."""

    def __init__(self, model, normalizer: Normalizer | None, window_len: int, tiles_per_batch: int = 8):
        if normalizer is None:
            raise MissingNormalizer("model evaluation needs the training-split normaliser")
        self.model = model
        self.normalizer = normalizer
        self.window_len = window_len
        self.tiles_per_batch = tiles_per_batch

    def logits(self, example: SignalExample) -> np.ndarray:
        x = self.normalizer.apply(example.iq)
        n = x.shape[1]
        w = self.window_len
        starts = tile_starts(n, w)
        out = np.empty((self.model.stages[-1].config.out_channels, n), dtype=np.float32)
        covered = 0
        for b in range(0, len(starts), self.tiles_per_batch):
            chunk = starts[b:b + self.tiles_per_batch]
            batch = np.stack([x[:, s:s + w] for s in chunk])
            logits = self.model.predict_logits(batch)
            for s, lg in zip(chunk, logits):
                lo = max(s, covered)
                out[:, lo:s + w] = lg[:, lo - s:]
                covered = s + w
        return out

    def predict(self, example: SignalExample) -> np.ndarray:
        return sigmoid(self.logits(example))


class OraclePredictor:
    """Returns the ground-truth mask itself."""

    def predict(self, example: SignalExample) -> np.ndarray:
        return example.mask.astype(np.float32)


class ConstantPredictor:
    """Same probability everywhere; 0.5 mimics a model whose logits are all zero."""

    def __init__(self, probability: float):
        self.probability = probability

    def predict(self, example: SignalExample) -> np.ndarray:
        return np.full(example.mask.shape, self.probability, dtype=np.float32)


@dataclass
class MetricsRow:
    snr_db: float
    count: int
    mean: dict[str, float | None]
    std: dict[str, float | None]
    n: dict[str, int]

    def to_dict(self) -> dict:
        return {"snr_db": self.snr_db, "count": self.count, "mean": self.mean, "std": self.std, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsRow":
        return cls(float(d["snr_db"]), int(d["count"]), d["mean"], d["std"], d["n"])


@dataclass
class EvalReport:
    rows: list[MetricsRow]
    threshold: float = THRESHOLD
    f1_average: str = "micro"
    metadata: dict = field(default_factory=dict)
    per_example: list[dict] = field(default_factory=list)

    @property
    def bins(self) -> list[float]:
        return [r.snr_db for r in self.rows]

    def row(self, snr_db: float) -> MetricsRow | None:
        for r in self.rows:
            if r.snr_db == snr_db:
                return r
        return None

    def summary(self, snrs: Iterable[float] = TABLE_SNRS) -> dict[str, dict[float, float | None]]:
        """Exact-bin lookups of each metric's mean; missing bins give None."""
        out: dict[str, dict[float, float | None]] = {m: {} for m in METRICS}
        for s in snrs:
            r = self.row(float(s))
            for m in METRICS:
                out[m][float(s)] = None if r is None else r.mean[m]
        return out

    def overall(self, metric: str = "iou") -> float | None:
        vals = [e[metric] for e in self.per_example if e[metric] is not None]
        return float(np.mean(vals)) if vals else None

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "f1_average": self.f1_average,
            "metadata": self.metadata,
            "rows": [r.to_dict() for r in self.rows],
            "per_example": self.per_example,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            rows=[MetricsRow.from_dict(r) for r in d["rows"]],
            threshold=float(d.get("threshold", THRESHOLD)),
            f1_average=d.get("f1_average", "micro"),
            metadata=d.get("metadata", {}),
            per_example=d.get("per_example", []),
        )

    def to_csv(self) -> str:
        lines = ["snr_db,metric,mean,std,n,count"]
        for r in self.rows:
            for m in METRICS:
                lines.append(f"{r.snr_db:g},{m},{_fmt(r.mean[m])},{_fmt(r.std[m])},{r.n[m]},{r.count}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def aggregate(per_example: list[dict]) -> list[MetricsRow]:
    by_snr: dict[float, list[dict]] = {}
    for e in per_example:
        by_snr.setdefault(float(e["snr_db"]), []).append(e)
    rows = []
    for snr in sorted(by_snr):
        group = by_snr[snr]
        mean, std, n = {}, {}, {}
        for m in METRICS:
            vals = np.array([e[m] for e in group if e[m] is not None], dtype=np.float64)
            n[m] = int(vals.size)
            mean[m] = float(vals.mean()) if vals.size else None
            std[m] = float(vals.std()) if vals.size else None
        rows.append(MetricsRow(snr, len(group), mean, std, n))
    return rows


def evaluate(predictor: Predictor, dataset, threshold: float = THRESHOLD, f1_average: str = "micro",
             metadata: dict | None = None) -> EvalReport:
    """Score every example of ``dataset`` and group the scores by SNR."""
    per_example = []
    for i in range(len(dataset)):
        ex = dataset[i]
        pred = binarize(predictor.predict(ex), threshold)
        scores = example_scores(pred, ex.mask, f1_average)
        per_example.append({"index": ex.index, "snr_db": float(ex.snr_db), **scores})
    meta = {"threshold": threshold, **(metadata or {})}
    return EvalReport(aggregate(per_example), threshold, f1_average, meta, per_example)

