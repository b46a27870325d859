"""``radseg`` command line: generate | train | eval | report | inspect | gradcheck.

Configuration precedence, lowest to highest: built-in defaults, ``--profile``,
``--config FILE`` (a RunConfig JSON document), then individual flags. Every
command that writes output echoes the resolved config as ``config.json`` in
its ``--out`` directory.

Exit codes: 0 ok, 1 gradcheck failure, 2 config error or index out of range,
3 I/O error, 4 non-finite loss, 5 checkpoint or dataset incompatible or
missing, 6 SNR bins differ between runs.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import json
import logging
import os
import sys
import zlib
from pathlib import Path

import numpy as np

from radseg import errors as E
from radseg.checkpoint import load_checkpoint, save_checkpoint
from radseg.evaluate import TABLE_SNRS, EvalReport, ModelPredictor, OraclePredictor, evaluate
from radseg.metrics import CONFUSION_NAMES, binarize, confusion_labels
from radseg.models import build_model, model_spec
from radseg.report import Run, render_svg, report_csv, report_table
from radseg.store import MANIFEST_NAME, Dataset, Normalizer, write_dataset
from radseg.synthesis import GenerationConfig, WaveformClass, generate, summarize
from radseg.train import TrainConfig, train

log = logging.getLogger("radseg")

EXIT_OK, EXIT_GRADCHECK, EXIT_CONFIG, EXIT_IO, EXIT_NAN, EXIT_INCOMPATIBLE, EXIT_BINS = 0, 1, 2, 3, 4, 5, 6

SPLIT_OFFSETS = {"train": 0, "val": 1, "test": 2}

SECTIONS = ("generation", "data", "model", "train", "eval")
DATA_DEFAULTS = {"counts": {"train": 60000, "val": 10000, "test": 10000}}
MODEL_DEFAULTS = {"arch": "ms_unet1d", "stages": 1, "refine_input": "probabilities", "seed": 0,
                  "base_channels": 64, "depth": 5, "width": 512, "layers": 10, "kernel": 3}
EVAL_DEFAULTS = {"threshold": 0.5, "f1_average": "micro", "window_len": None, "bins": list(TABLE_SNRS)}

PROFILES = {
    "default": {},
    "smoke": {
        "generation": {"n_samples": 1024, "snr_min_db": 20.0, "snr_max_db": 20.0, "toa_us": [0.0, 100.0]},
        "data": {"counts": {"train": 16, "val": 16, "test": 16}},
        "model": {"base_channels": 8},
        "train": {"epochs": 200, "max_steps": 200, "lr": 1e-4, "batch_size": 16, "window_len": 1024,
                  "windows_per_example": 1},
        "eval": {"bins": [20.0]},
    },
    "desk": {
        "generation": {"snr_min_db": -10.0, "snr_max_db": 10.0},
        "data": {"counts": {"train": 2000, "val": 200, "test": 200}},
        "model": {"base_channels": 16},
        "train": {"epochs": 10, "window_len": 4096},
        "eval": {"bins": [-10.0, -5.0, 0.0, 5.0, 10.0]},
    },
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------ RunConfig

def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_keys(section: str, d: dict, known):
    unknown = set(d) - set(known)
    if unknown:
        raise E.InvalidConfig(f"unknown {section} keys: {sorted(unknown)}")


def validate_run_config(doc: dict) -> dict:
    """Strict check of a RunConfig document; returns it with defaults filled in."""
    if not isinstance(doc, dict):
        raise E.InvalidConfig("config must be a JSON object")
    _check_keys("top-level", doc, SECTIONS)
    out = _merge({"generation": GenerationConfig().to_dict(), "data": DATA_DEFAULTS, "model": MODEL_DEFAULTS,
                  "train": TrainConfig().to_dict(), "eval": EVAL_DEFAULTS}, doc)
    gen = dict(out["generation"])
    GenerationConfig.from_dict({k: tuple(v) if isinstance(v, list) else v for k, v in gen.items()})
    _check_keys("data", out["data"], DATA_DEFAULTS)
    _check_keys("model", out["model"], MODEL_DEFAULTS)
    TrainConfig.from_dict(out["train"])
    _check_keys("eval", out["eval"], EVAL_DEFAULTS)
    if not 1 <= int(out["model"]["stages"]) <= 5:
        raise E.InvalidConfig("stages must be in 1..5")
    if out["eval"]["f1_average"] not in ("micro", "macro"):
        raise E.InvalidConfig("f1_average must be micro or macro")
    return out


def generation_config(run: dict) -> GenerationConfig:
    g = run["generation"]
    return GenerationConfig.from_dict({k: tuple(v) if isinstance(v, list) else v for k, v in g.items()})


def train_config(run: dict) -> TrainConfig:
    return TrainConfig.from_dict(dict(run["train"]))


def architecture(run: dict) -> dict:
    m = run["model"]
    if m["arch"] == "ms_unet1d":
        cfg = {"base_channels": m["base_channels"], "depth": m["depth"]}
    elif m["arch"] == "ms_tcn":
        cfg = {"width": m["width"], "layers": m["layers"], "kernel": m["kernel"]}
    else:
        cfg = {}
    return model_spec(m["arch"], int(m["stages"]), m["refine_input"], **cfg)


def split_seed(global_seed: int, split: str) -> int:
    """Generation seed of a named split; train/val/test use offsets 0/1/2."""
    offset = SPLIT_OFFSETS.get(split)
    if offset is None:
        offset = zlib.crc32(split.encode("utf-8"))
    return int(global_seed) + offset


def load_run_config(args) -> dict:
    doc = copy.deepcopy(PROFILES[getattr(args, "profile", None) or "default"])
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read config: {exc}") from exc
        try:
            doc = _merge(doc, json.loads(text))
        except ValueError as exc:
            raise E.InvalidConfig(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise E.InvalidConfig("config must be a JSON object")
    over: dict = {}
    for section, key, attr in _FLAG_MAP:
        v = getattr(args, attr, None)
        if v is not None:
            over.setdefault(section, {})[key] = v
    return validate_run_config(_merge(doc, over))


_FLAG_MAP = [
    ("generation", "global_seed", "seed"),
    ("generation", "n_samples", "n_samples"),
    ("model", "stages", "stages"),
    ("model", "arch", "arch"),
    ("model", "base_channels", "base_channels"),
    ("model", "seed", "model_seed"),
    ("model", "refine_input", "refine_input"),
    ("train", "epochs", "epochs"),
    ("train", "max_steps", "max_steps"),
    ("train", "lr", "lr"),
    ("train", "batch_size", "batch_size"),
    ("train", "window_len", "window_len"),
    ("train", "seed", "train_seed"),
    ("train", "checkpoint_every", "checkpoint_every"),
    ("eval", "threshold", "threshold"),
    ("eval", "f1_average", "f1_average"),
]


def echo_config(run: dict, out: Path, extra: dict | None = None):
    doc = dict(run)
    if extra:
        doc = {**doc, "resolved": extra}
    _write(out / "config.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from exc


def _jobs(requested: int | None) -> int:
    jobs = requested or 1
    cap = os.environ.get("RADSEG_THREADS")
    if cap:
        try:
            jobs = min(jobs, max(1, int(cap)))
        except ValueError:
            raise E.InvalidConfig(f"RADSEG_THREADS must be an integer, got {cap!r}") from None
    return max(1, jobs)


def _thread_limit():
    cap = os.environ.get("RADSEG_THREADS")
    if not cap:
        return None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(1, int(cap)))


def _split_dir(path: Path, default_split: str) -> Path:
    if (path / MANIFEST_NAME).exists():
        return path
    return path / default_split


def _open_dataset(path: Path) -> Dataset:
    try:
        return Dataset(path)
    except E.IoFailure as exc:
        raise CliError(EXIT_IO, f"no readable dataset at {path}: {exc}") from exc


# ------------------------------------------------------------------ commands

def cmd_generate(args) -> int:
    run = load_run_config(args)
    gen = generation_config(run)
    out = Path(args.out)
    if args.split:
        count = args.count if args.count is not None else run["data"]["counts"].get(args.split)
        if count is None:
            raise E.InvalidConfig(f"no count for split {args.split!r}; pass --count")
        plan = {args.split: int(count)}
    else:
        plan = {k: int(v) for k, v in run["data"]["counts"].items()}
        if args.count is not None:
            plan = {k: int(args.count) for k in plan}
    jobs = _jobs(args.jobs)
    resolved = {}
    for split, count in plan.items():
        cfg = gen.replace(global_seed=split_seed(gen.global_seed, split))
        counts = {"count": 0, "per_class": {w.name: 0 for w in WaveformClass}, "per_snr": {}}

        def tally(stream):
            for ex in stream:
                s = summarize([ex])
                counts["count"] += 1
                for k, v in s["per_class"].items():
                    counts["per_class"][k] += v
                for k, v in s["per_snr"].items():
                    counts["per_snr"][k] = counts["per_snr"].get(k, 0) + v
                yield ex

        write_dataset(tally(generate(cfg, count, jobs=jobs)), out / split, cfg, split,
                      compute_stats=(split == "train"))
        resolved[split] = {"global_seed": cfg.global_seed, "count": count}
        print(f"[{split}] {counts['count']} examples -> {out / split}")
        print("  per class (emitters): " + ", ".join(f"{k}={v}" for k, v in counts["per_class"].items()))
        print("  per SNR (dB: examples): " + ", ".join(f"{k:g}:{v}" for k, v in sorted(counts["per_snr"].items())))
    echo_config(run, out, {"splits": resolved, "jobs": jobs})
    return EXIT_OK


def _history_rows(path: Path) -> list[str]:
    if not path.exists():
        return []
    return path.read_text(encoding="utf-8").splitlines()[1:]


def cmd_train(args) -> int:
    run = load_run_config(args)
    tc = train_config(run)
    data = Path(args.data)
    train_ds = _open_dataset(_split_dir(data, "train") if args.train_split is None else data / args.train_split)
    val_path = data / (args.val_split or "val")
    val_ds = _open_dataset(val_path) if (val_path / MANIFEST_NAME).exists() else None
    if train_ds.normalizer is None:
        raise CliError(EXIT_INCOMPATIBLE, "training split has no normaliser statistics")
    if val_ds is not None and val_ds.n_samples != train_ds.n_samples:
        raise CliError(EXIT_INCOMPATIBLE, "train and val splits have different signal lengths")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = architecture(run)
    start_epoch, start_step, optimizer = 0, 0, None
    if args.resume:
        ckpt = _load_ckpt(args.resume, spec)
        model = ckpt.model
        optimizer = ckpt.optimizer
        start_epoch = int(ckpt.metadata.get("epoch", 0))
        start_step = int(ckpt.metadata.get("step", 0))
    else:
        model = build_model(spec, seed=int(run["model"]["seed"]))
    echo_config(run, out, {"architecture": spec, "start_epoch": start_epoch, "start_step": start_step,
                           "train_split": str(train_ds.directory),
                           "val_split": None if val_ds is None else str(val_ds.directory)})
    history_path = out / "history.csv"
    previous = _history_rows(history_path) if args.resume else []
    meta = {"model": run["model"]["arch"], "stages": spec["stages"], "generation": train_ds.manifest.generation}
    try:
        with _thread_limit() or _null():
            result = train(model, train_ds, tc, normalizer=train_ds.normalizer, out_dir=out, val_dataset=val_ds,
                           optimizer=optimizer, start_epoch=start_epoch, start_step=start_step, metadata=meta,
                           on_epoch=lambda e, v: print(f"epoch {e}: loss {v:.6f}", flush=True))
    except E.NonFiniteLoss as exc:
        dump = {"error": str(exc), **_jsonable(exc.diagnostics)}
        _write(out / "nan_dump.json", json.dumps(dump, indent=1, sort_keys=True) + "\n")
        save_checkpoint(model, out / "nan_state.ckpt", {**meta, "diagnostics": _jsonable(exc.diagnostics)})
        raise
    lines = ["epoch,step,loss"] + previous + result.history_csv().splitlines()[1:]
    _write(history_path, "\n".join(lines) + "\n")
    if result.val_losses:
        _write(out / "val_history.csv", "epoch,val_loss\n" + "".join(
            f"{start_epoch + i},{v!r}\n" for i, v in enumerate(result.val_losses)))
    print(f"trained {result.steps - start_step} steps; final loss {result.history[-1][2]:.6f}")
    if args.eval_train:
        rep = evaluate(ModelPredictor(model, train_ds.normalizer, tc.window_len), train_ds,
                       run["eval"]["threshold"], run["eval"]["f1_average"])
        _write(out / "train_eval.json", rep.to_json())
        print(f"training-set IoU {rep.overall('iou'):.4f}")
    return EXIT_OK


class _null:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _load_ckpt(path, expected=None):
    if not Path(path).exists():
        raise CliError(EXIT_INCOMPATIBLE, f"checkpoint {path} does not exist")
    try:
        return load_checkpoint(path, expected)
    except (E.CorruptCheckpoint, E.VersionMismatch, E.InvalidConfig) as exc:
        raise CliError(EXIT_INCOMPATIBLE, f"{path}: {exc}") from exc


def _checkpoint_normalizer(ckpt) -> Normalizer:
    norm = Normalizer.from_dict(ckpt.metadata.get("normalizer"))
    if norm is None:
        raise CliError(EXIT_INCOMPATIBLE, "checkpoint carries no normaliser statistics")
    return norm


def _check_compatible(ckpt, ds: Dataset, window_len: int):
    if window_len > ds.n_samples:
        raise CliError(EXIT_INCOMPATIBLE, f"model window {window_len} exceeds signal length {ds.n_samples}")
    mult = 2 ** (ckpt.model.spec.get("unet", {}).get("depth", 1) - 1)
    if window_len % mult:
        raise CliError(EXIT_INCOMPATIBLE, f"window {window_len} is not a multiple of {mult}")


def cmd_eval(args) -> int:
    run = load_run_config(args)
    ds = _open_dataset(_split_dir(Path(args.data), "test"))
    threshold = float(run["eval"]["threshold"])
    f1_average = run["eval"]["f1_average"]
    out = Path(args.out)
    if args.oracle:
        predictor = OraclePredictor()
        meta = {"model": "oracle", "stages": None}
    else:
        if not args.checkpoint:
            raise E.InvalidConfig("eval needs --checkpoint or --oracle")
        ckpt = _load_ckpt(args.checkpoint)
        window = run["eval"]["window_len"] or ckpt.metadata.get("train", {}).get("window_len") or ds.n_samples
        _check_compatible(ckpt, ds, int(window))
        predictor = ModelPredictor(ckpt.model, _checkpoint_normalizer(ckpt), int(window))
        spec = ckpt.model.spec
        meta = {"model": {"ms_unet1d": "MS-UNet1D", "ms_tcn": "MS-TCN"}.get(spec["arch"], spec["arch"]),
                "stages": spec["stages"], "architecture": spec, "checkpoint": str(args.checkpoint),
                "window_len": int(window)}
    if args.name:
        meta["model"] = args.name
    meta["data"] = str(ds.directory)
    try:
        rep = evaluate(predictor, ds, threshold, f1_average, meta)
    except (E.BadLength, E.WindowTooLong) as exc:
        raise CliError(EXIT_INCOMPATIBLE, str(exc)) from exc
    echo_config(run, out, {"eval_metadata": meta})
    _write(out / "metrics.csv", rep.to_csv())
    _write(out / "report.json", rep.to_json())
    summary = report_table([Run.from_report(rep)], snrs=run["eval"]["bins"], reference=False)
    _write(out / "summary.txt", summary)
    print(summary, end="")
    return EXIT_OK


def cmd_report(args) -> int:
    runs = []
    for d in args.runs:
        path = Path(d)
        path = path if path.suffix == ".json" else path / "report.json"
        try:
            rep = EvalReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
        runs.append(Run.from_report(rep))
    out = Path(args.out)
    text = report_table(runs, snrs=args.snrs or TABLE_SNRS)
    _write(out / "report.txt", text)
    _write(out / "report.csv", report_csv(runs))
    _write(out / "report.svg", render_svg(runs))
    print(text, end="")
    return EXIT_OK


def cmd_inspect(args) -> int:
    ds = _open_dataset(_split_dir(Path(args.data), "test"))
    ex = ds[args.index]
    out = Path(args.out)
    doc = {"index": ex.index, "snr_db": float(ex.snr_db), "n_samples": int(ex.iq.size),
           "sample_rate_hz": ds.manifest.sample_rate_hz, "emitters": [e.to_dict() for e in ex.emitters],
           "i": ex.iq.real.astype(float).tolist(), "q": ex.iq.imag.astype(float).tolist(),
           "gt_mask": ex.mask.tolist(), "channels": [w.name for w in WaveformClass]}
    cols = ["sample", "i", "q"] + [f"gt_{w.name}" for w in WaveformClass]
    table = [np.arange(ex.iq.size), ex.iq.real, ex.iq.imag, *ex.mask]
    if args.checkpoint:
        ckpt = _load_ckpt(args.checkpoint)
        window = ckpt.metadata.get("train", {}).get("window_len") or ds.n_samples
        _check_compatible(ckpt, ds, int(window))
        prob = ModelPredictor(ckpt.model, _checkpoint_normalizer(ckpt), int(window)).predict(ex)
        pred = binarize(prob, args.threshold)
        labels = confusion_labels(pred, ex.mask)
        doc.update({"probability": prob.astype(float).tolist(), "pred_mask": pred.tolist(),
                    "labels": labels.tolist(), "label_names": list(CONFUSION_NAMES)})
        cols += [f"pred_{w.name}" for w in WaveformClass] + [f"label_{w.name}" for w in WaveformClass]
        table += [*pred, *labels]
    _write(out / f"example-{ex.index}.json", json.dumps(doc) + "\n")
    path = out / f"example-{ex.index}.csv"
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            kinds = [int] + [float, float] + [int] * (len(cols) - 3)
            for row in zip(*table):
                w.writerow([k(v) if k is int else repr(float(v)) for k, v in zip(kinds, row)])
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from exc
    print(f"wrote {out / f'example-{ex.index}.json'} and {path}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from radseg.nn.gradcheck import run_suite
    results = run_suite(n_seeds=args.seeds, tolerance=args.tolerance)
    ok = True
    lines = [f"{'layer':<24} {'cases':>5} {'max rel err':>12}  status"]
    for name, reports in results.items():
        worst = max(r.max_error for r in reports)
        passed = all(r.passed for r in reports)
        ok &= passed
        lines.append(f"{name:<24} {len(reports):>5} {worst:>12.3e}  {'ok' if passed else 'FAIL'}")
    lines.append(f"tolerance {args.tolerance:g}: {'PASS' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        _write(Path(args.out) / "gradcheck.txt", text)
    return EXIT_OK if ok else EXIT_GRADCHECK


# ------------------------------------------------------------------ parser

def _config_args(p):
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--profile", choices=sorted(PROFILES), help="built-in config profile")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radseg", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesise dataset splits")
    _config_args(p)
    p.add_argument("--out", required=True, help="dataset root; each split goes to OUT/NAME")
    p.add_argument("--split", help="single split name (default: every split in data.counts)")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int, help="generation.global_seed")
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (capped by RADSEG_THREADS)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a (multi-stage) model")
    _config_args(p)
    p.add_argument("--data", required=True, help="dataset root holding train/ and val/")
    p.add_argument("--out", required=True)
    p.add_argument("--train-split", dest="train_split")
    p.add_argument("--val-split", dest="val_split")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--arch", choices=["ms_unet1d", "ms_tcn"])
    p.add_argument("--stages", type=int, choices=range(1, 6))
    p.add_argument("--base-channels", type=int, dest="base_channels")
    p.add_argument("--refine-input", choices=["probabilities", "logits"], dest="refine_input")
    p.add_argument("--model-seed", type=int, dest="model_seed")
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--window-len", type=int, dest="window_len")
    p.add_argument("--train-seed", type=int, dest="train_seed")
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--eval-train", action="store_true", help="score the trained model on its training split")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="SNR-binned metrics of a checkpoint on a split")
    _config_args(p)
    p.add_argument("--checkpoint")
    p.add_argument("--oracle", action="store_true", help="score the ground truth against itself")
    p.add_argument("--data", required=True, help="split directory (or dataset root, uses test/)")
    p.add_argument("--out", required=True)
    p.add_argument("--name", help="model label in reports")
    p.add_argument("--threshold", type=float)
    p.add_argument("--f1-average", choices=["micro", "macro"], dest="f1_average")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="combine several eval runs")
    p.add_argument("--runs", nargs="+", required=True, help="eval output directories or report.json files")
    p.add_argument("--out", required=True, help="directory for report.txt, report.csv and report.svg")
    p.add_argument("--snrs", type=float, nargs="+", help="SNR columns of the text table")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("inspect", help="dump one example (and optionally a prediction)")
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer and loss")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"radseg: {exc}", file=sys.stderr)
        return exc.code
    except E.NonFiniteLoss as exc:
        print(f"radseg: {exc} (diagnostics in nan_dump.json)", file=sys.stderr)
        return EXIT_NAN
    except E.BinMismatch as exc:
        print(f"radseg: {exc}", file=sys.stderr)
        return EXIT_BINS
    except (E.CorruptCheckpoint, E.VersionMismatch, E.MissingNormalizer, E.BadLength, E.WindowTooLong,
            E.CorruptShard) as exc:
        print(f"radseg: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (E.InvalidConfig, E.OutOfRange, E.NoSuchCode) as exc:
        print(f"radseg: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"radseg: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TypeError, ValueError) as exc:
        print(f"radseg: bad configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
