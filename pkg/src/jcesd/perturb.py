"""Robustness perturbations applied to received slots."""

from __future__ import annotations

import numpy as np

# Per-symbol CFO phase advance: (CP + FFT samples) over the reference sample
# rate, kept as an exact rational.
CFO_TICK_NUM = 2192
CFO_TICK_DEN = 15_000 * 2048


def apply_cfo(y, delta_f):
    """Carrier frequency offset: rotate symbol s by 2 pi df tick s.

    Pure per-symbol phase rotation, so the entrywise modulus is preserved
    and offsets compose additively.
    """
    y = np.asarray(y)
    s = np.arange(y.shape[1])
    theta = 2.0 * np.pi * float(delta_f) * (CFO_TICK_NUM / CFO_TICK_DEN) * s
    return y * np.exp(1j * theta)[None, :, None]


def apply_asymmetric_noise(y, sigma1_sq, sigma2_sq, rng):
    """Add CN(0, 2 sigma1^2) noise to the lower F/2 subcarriers and
    CN(0, 2 sigma2^2) to the upper ones (per-component variance sigma_i^2).
    """
    if sigma1_sq < 0 or sigma2_sq < 0:
        raise ValueError("noise variances must be nonnegative")
    y = np.asarray(y)
    f = y.shape[0]
    scale = np.where(np.arange(f) < f // 2, np.sqrt(sigma1_sq), np.sqrt(sigma2_sq))
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + noise * scale[:, None, None]
