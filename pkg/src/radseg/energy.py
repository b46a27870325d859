"""Class-agnostic energy detector used as a non-learned sanity oracle."""

from __future__ import annotations

import numpy as np
from scipy import ndimage, stats

WINDOW = 8
GAMMA = 3.0
CLOSING_RADIUS = 4


def _floor_bias(window: int) -> float:
    # The moving average of |n|^2 over `window` samples of complex AWGN is
    # Gamma(window, 1/window) in units of the noise power; the median of its
    # lowest decile is its 5th percentile.
    return float(stats.gamma.ppf(0.05, a=window, scale=1.0 / window))


def noise_floor(smoothed_power: np.ndarray, window: int = WINDOW) -> float:
    """Noise power estimate from the median of the lowest decile of window powers."""
    lowest = np.sort(smoothed_power)[: max(1, smoothed_power.size // 10)]
    return float(np.median(lowest)) / _floor_bias(window)


def energy_detector(iq: np.ndarray, window: int = WINDOW, gamma: float = GAMMA,
                    closing_radius: int = CLOSING_RADIUS) -> np.ndarray:
    """Occupancy mask (uint8, length N) of samples carrying signal energy.

    A sample is marked when both the moving-average power around it and its
    own instantaneous power exceed ``gamma`` times the noise floor; gaps up to
    twice the closing radius are then filled.
    """
    iq = np.asarray(iq)
    if iq.shape[-1] < window:
        raise ValueError(f"signal shorter than the {window}-sample window")
    power = np.abs(iq.astype(np.complex128)) ** 2
    # direct weighted sum rather than a running sum, so silent stretches stay exactly zero
    smoothed = ndimage.correlate1d(power, np.full(window, 1.0 / window), mode="nearest")
    threshold = gamma * noise_floor(smoothed, window)
    marked = (smoothed > threshold) & (power > threshold)
    size = 2 * closing_radius + 1
    closed = ndimage.maximum_filter1d(marked.astype(np.uint8), size, mode="nearest")
    closed = ndimage.minimum_filter1d(closed, size, mode="nearest")
    return closed.astype(np.uint8)
