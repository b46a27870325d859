"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines. The desk-scale
benchmark (criterion 9) takes hours and only runs with RADSEG_SLOW=1.
"""

import hashlib
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from radseg import probes
from radseg.energy import energy_detector
from radseg.evaluate import ModelPredictor, evaluate
from radseg.metrics import binarize, example_scores, metric_dice_iou, metric_f1
from radseg.models import UNetConfig, build_ms_unet, build_unet1d, multi_stage_loss, unet_parameter_count
from radseg.nn.gradcheck import run_suite
from radseg.nn.losses import loss
from radseg.store import Dataset, reconstruct_mask, write_dataset
from radseg.synthesis import (
    GenerationConfig, WaveformClass, add_awgn, chip_boundaries, generate, measure_snr,
    pulse_extents, render_clean, render_example,
)
from radseg.train import TrainConfig, train


def verdict(number: int, title: str, ok: bool, detail: str):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
    assert ok, detail


def test_parameter_count_anchor():
    t0 = time.perf_counter()
    count = unet_parameter_count(UNetConfig())
    seconds = time.perf_counter() - t0
    verdict(1, "parameter count", count == 10_824_581 and seconds < 1.0,
            f"{count:,} trainable parameters in {seconds * 1e3:.2f} ms")


def test_gradient_oracle():
    t0 = time.perf_counter()
    results = run_suite(n_seeds=20, tolerance=1e-4)
    seconds = time.perf_counter() - t0
    failed = [name for name, reps in results.items() if not all(r.passed for r in reps)]
    worst = max(r.max_error for reps in results.values() for r in reps)
    enough = all(len(reps) >= 20 for reps in results.values())
    expected = {"loss_bce_logits", "loss_dice", "loss_huber"}
    verdict(2, "gradient oracle", not failed and enough and expected <= set(results) and seconds < 120,
            f"{len(results)} kinds x 20 seeds, worst rel err {worst:.2e}, failed {failed}, {seconds:.1f} s")


def _code_sidelobe_ok(em, cfg) -> bool:
    """Recover chip phases from the rendered pulse and check its aperiodic autocorrelation."""
    clean, _ = render_clean([em], cfg)
    start, stop = pulse_extents(em, cfg.n_samples, cfg.sample_rate_hz)[0]
    width = int(np.floor(em.pw_us * cfg.sample_rate_hz * 1e-6 + 0.5))
    if stop - start < width:
        return True  # truncated first pulse carries a partial code
    b = chip_boundaries(width, em.code_length)
    chips = clean[start + (b[:-1] + b[1:]) // 2]
    acf = np.correlate(chips, chips, mode="full")
    n = len(chips)
    return abs(abs(acf[n - 1]) - n) < 1e-9 and np.delete(np.abs(acf), n - 1).max() <= 1 + 1e-9


def test_generator_calibration():
    t0 = time.perf_counter()
    means, occupancy_ok, codes_checked, codes_ok = {}, True, 0, True
    for target in (-20.0, 0.0, 20.0):
        cfg = GenerationConfig(snr_min_db=target, snr_max_db=target, global_seed=101)
        measured = []
        for i in range(100):
            ex = render_example(cfg.global_seed, i, cfg)
            clean, _ = render_clean(ex.emitters, cfg)
            # per-pulse power: samples where exactly one pulse is on
            measured.append(measure_snr(clean, ex.iq, ex.mask.sum(axis=0) == 1))
            for em in ex.emitters:
                widths = sum(b - a for a, b in pulse_extents(em, cfg.n_samples, cfg.sample_rate_hz))
                occupancy_ok &= int(ex.mask[em.waveform.channel].sum()) == widths
                if em.waveform in (WaveformClass.BARKER, WaveformClass.POLYPHASE_BARKER):
                    codes_checked += 1
                    codes_ok &= _code_sidelobe_ok(em, cfg)
        means[target] = float(np.mean(measured))
    seconds = time.perf_counter() - t0
    snr_ok = all(abs(means[t] - t) <= 0.3 for t in means)
    verdict(3, "generator calibration", snr_ok and occupancy_ok and codes_ok and codes_checked > 0 and seconds < 60,
            "mean SNR " + ", ".join(f"{t:+.0f}->{m:+.3f} dB" for t, m in means.items())
            + f"; occupancy exact {occupancy_ok}; {codes_checked} codes sidelobe-ok {codes_ok}; {seconds:.1f} s")


def test_oracle_equivalence(tmp_path):
    cfg = GenerationConfig(global_seed=202)
    t0 = time.perf_counter()
    write_dataset(generate(cfg, 1000), tmp_path / "ds", cfg, "test")
    ds = Dataset(tmp_path / "ds")
    masks_ok = lossless = True
    for i, ex in enumerate(ds):
        m = reconstruct_mask(ds.manifest.emitters(i), ds.n_samples, ds.manifest.sample_rate_hz)
        masks_ok &= np.array_equal(m, ex.mask)
        lossless &= render_example(cfg.global_seed, i, cfg).equals(ex)
    seconds = time.perf_counter() - t0
    verdict(4, "oracle equivalence", masks_ok and lossless and len(ds) == 1000 and seconds < 60,
            f"{len(ds)} examples, masks bit-exact {masks_ok}, round trip lossless {lossless}, {seconds:.1f} s")


def test_energy_detector_sanity():
    cfg = GenerationConfig(snr_min_db=20.0, snr_max_db=20.0, global_seed=303)
    t0 = time.perf_counter()
    ious = []
    for i in range(100):
        ex = render_example(cfg.global_seed, i, cfg)
        ious.append(metric_dice_iou(energy_detector(ex.iq), ex.mask.any(axis=0))[1][0])
    rng = np.random.default_rng(303)
    occupancy = [energy_detector(add_awgn(np.zeros(cfg.n_samples, complex), 0.0, rng)).mean() for _ in range(20)]
    seconds = time.perf_counter() - t0
    iou, occ = float(np.mean(ious)), float(np.max(occupancy))
    verdict(5, "energy detector", iou > 0.9 and occ < 0.05 and seconds < 120,
            f"mean IoU {iou:.4f} at +20 dB, worst pure-noise occupancy {occ:.4f}, {seconds:.1f} s")


def test_overfit_probe():
    result = probes.overfit_probe()
    verdict(6, "overfit probe", result.train_iou > 0.9 and result.seconds < 600,
            f"training IoU {result.train_iou:.3f} after {result.steps} steps at lr 1e-4, loss "
            f"{result.losses[0]:.3f}->{result.losses[-1]:.3f}, {result.seconds:.1f} s")


def test_additivity_and_stage_zero():
    rng = np.random.default_rng(7)
    ms = build_ms_unet(stages=3, seed=3, dtype=np.float64, base_channels=4, depth=3)
    x = rng.standard_normal((2, 2, 64))
    target = (rng.random((2, 5, 64)) < 0.3).astype(np.float64)
    outputs = ms.forward(x, train=True)
    worst = 0.0
    for kind in ("bce_logits", "dice", "huber"):
        total, _, _ = multi_stage_loss(outputs, target, kind=kind)
        independent = math.fsum(loss(kind, z, target)[0] for z in outputs)
        worst = max(worst, abs(total - independent))
    cfg = UNetConfig(base_channels=8, depth=5)
    single = build_unet1d(cfg, seed=11)
    one = build_ms_unet(stages=1, seed=11, base_channels=8, depth=5)
    same_params = all(n1 == n2 and np.array_equal(p1, p2) for (n1, p1, _), (n2, p2, _)
                      in zip(single.named_parameters(), one.stages[0].named_parameters()))
    xs = rng.standard_normal((2, 2, 1024)).astype(np.float32)
    same_out = (np.array_equal(single.forward(xs, train=True), one.forward(xs, train=True)[0])
                and np.array_equal(single.forward(xs, train=False), one.forward(xs, train=False)[0]))
    verdict(7, "additivity and stage-0 equivalence", worst <= 1e-7 and same_params and same_out,
            f"max |sum - total| {worst:.2e}; parameters identical {same_params}; outputs identical {same_out}")


def test_metric_identities():
    rng = np.random.default_rng(8)
    worst_f1, worst_dice = 0.0, 0.0
    for _ in range(500):
        n = int(rng.integers(1, 200))
        a = rng.random(n) < rng.random()
        b = rng.random(n) < rng.random()
        f1 = metric_f1(a, b)
        dice, iou = metric_dice_iou(a, b)
        if f1 is not None:
            worst_f1 = max(worst_f1, abs(f1 - dice[0]))
        multi_a = rng.random((5, n)) < 0.3
        multi_b = rng.random((5, n)) < 0.3
        d, j = metric_dice_iou(multi_a, multi_b)
        keep = ~np.isnan(d)
        worst_dice = max(worst_dice, float(np.max(np.abs(d[keep] - 2 * j[keep] / (1 + j[keep])), initial=0.0)))
    gt = np.zeros((5, 10), np.uint8)
    pred = np.zeros((5, 10), np.uint8)
    gt[0, :4] = 1
    pred[0, 2:6] = 1
    scores = example_scores(pred, gt)
    skip_ok = scores["iou"] == pytest.approx(2 / 6) and scores["dice"] == pytest.approx(0.5)
    empty = example_scores(np.zeros((5, 10)), np.zeros((5, 10)))
    skip_ok &= empty == {"f1": None, "dice": None, "iou": None}
    boundary_ok = binarize(np.array([0.5, np.nextafter(0.5, 0)])).tolist() == [1, 0]
    verdict(8, "metric identities", worst_f1 <= 1e-9 and worst_dice <= 1e-9 and skip_ok and boundary_ok,
            f"|F1 - Dice| {worst_f1:.1e}, |Dice - 2J/(1+J)| {worst_dice:.1e}, skips honoured {skip_ok}, "
            f"0.5 positive {boundary_ok}")


def test_desk_scale_trend(tmp_path):
    if os.environ.get("RADSEG_SLOW") != "1":
        print("\n[SKIP] criterion 9: desk-scale trend: multi-hour benchmark, set RADSEG_SLOW=1 to run")
        pytest.skip("slow benchmark; set RADSEG_SLOW=1")
    t0 = time.perf_counter()
    result = probes.desk_scale(tmp_path)
    hours = (time.perf_counter() - t0) / 3600
    trend = all(result.improves_with_snr(st, s) for st, s in result.reports)
    one, two = result.median_iou(1, -10.0), result.median_iou(2, -10.0)
    # the stage comparison is a review flag, only the SNR trend is a hard check
    flag = "" if two >= one else " (2-stage below 1-stage at -10 dB: flagged for review)"
    verdict(9, "desk-scale trend", trend,
            f"IoU(+10) > IoU(-10) for every model {trend}; median IoU at -10 dB 1-stage {one:.3f}, "
            f"2-stage {two:.3f}{flag}; {hours:.2f} h")


def _digest(directory: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(directory.rglob("*")):
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_determinism(tmp_path):
    cfg = GenerationConfig(n_samples=2048, toa_us=(0.0, 200.0), global_seed=404)
    tc = TrainConfig(epochs=2, batch_size=4, window_len=1024, windows_per_example=1, seed=5)
    digests = {"generate": [], "train": [], "evaluate": []}
    for run in ("a", "b"):
        root = tmp_path / run
        write_dataset(generate(cfg, 8), root / "data", cfg, "train", compute_stats=True)
        digests["generate"].append(_digest(root / "data"))
        ds = Dataset(root / "data")
        model = build_ms_unet(stages=2, seed=5, base_channels=4)
        train(model, ds, tc, out_dir=root / "run")
        digests["train"].append(hashlib.sha256((root / "run" / "final.ckpt").read_bytes()).hexdigest())
        report = evaluate(ModelPredictor(model, ds.normalizer, tc.window_len), ds)
        digests["evaluate"].append(hashlib.sha256(report.to_json().encode()).hexdigest())
    same = {k: v[0] == v[1] for k, v in digests.items()}
    verdict(10, "determinism", all(same.values()), ", ".join(f"{k} identical {v}" for k, v in same.items()))
