import numpy as np
import pytest

from radseg.energy import energy_detector, noise_floor
from radseg.metrics import metric_dice_iou
from radseg.synthesis import EmitterTruth, GenerationConfig, WaveformClass, render_clean, render_example, union_mask


def test_noiseless_pulse_recovered_exactly():
    cfg = GenerationConfig(n_samples=4096)
    em = EmitterTruth(WaveformClass.BARKER, 40.0, 400.0, 100.0, 3, 0.3, code_length=13)
    clean, mask = render_clean([em], cfg)
    np.testing.assert_array_equal(energy_detector(clean), union_mask(mask).astype(np.uint8))


def test_high_snr_iou():
    cfg = GenerationConfig(snr_min_db=20.0, snr_max_db=20.0)
    ious = []
    for i in range(10):
        ex = render_example(3, i, cfg)
        ious.append(metric_dice_iou(energy_detector(ex.iq), union_mask(ex.mask))[1][0])
    assert np.mean(ious) > 0.9


def test_pure_noise_false_alarm():
    r = np.random.default_rng(0)
    z = (r.standard_normal(32768) + 1j * r.standard_normal(32768)) / np.sqrt(2)
    assert energy_detector(z).mean() < 0.05


def test_noise_floor_is_unbiased_for_pure_noise():
    r = np.random.default_rng(1)
    p = np.abs((r.standard_normal(32768) + 1j * r.standard_normal(32768)) / np.sqrt(2)) ** 2
    smoothed = np.convolve(p, np.ones(8) / 8, mode="same")
    assert noise_floor(smoothed) == pytest.approx(1.0, rel=0.1)


def test_short_input_rejected():
    with pytest.raises(ValueError):
        energy_detector(np.zeros(4, complex))
