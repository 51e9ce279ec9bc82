"""Post-equalization effective gain, bit LLRs, and bit probabilities.

The MMSE output is modeled as X~ = G X + n' with n' ~ CN(0, eps^2),
G = ||h||^2 / (||h||^2 + sigma^2) and eps^2 = G (1 - G).  Under the
max-log approximation the two QPSK bit LLRs are linear in Re/Im of X~.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LLR_CLAMP = 40.0
_TWO_SQRT2 = 2.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class EffectiveGainGrid:
    g: np.ndarray     # (F, S)
    eps2: np.ndarray  # (F, S)


@dataclass(frozen=True)
class SoftBitGrid:
    llr: np.ndarray    # (F, S, 2)
    prob1: np.ndarray  # (F, S, 2)


def effective_gain(h_est, sigma2) -> EffectiveGainGrid:
    """Per-cell MMSE gain G and error variance eps^2 = G(1 - G).

    Requires sigma2 > 0 (at sigma2 = 0 the gain saturates at 1 and the
    error model degenerates).  Cells with zero channel energy get G = 0 and
    are treated as erasures downstream.
    """
    if sigma2 <= 0:
        raise ValueError("effective_gain requires sigma2 > 0")
    energy = np.sum(np.abs(np.asarray(h_est)) ** 2, axis=2)
    g = energy / (energy + sigma2)
    return EffectiveGainGrid(g=g, eps2=g * (1.0 - g))


def llr_to_prob(llr):
    """Numerically stable logistic of the LLR, clamped to +/-40.

    The result stays strictly inside (0, 1): saturation lands on the nearest
    representable neighbours of 0 and 1 rather than the endpoints.
    """
    x = np.clip(np.asarray(llr, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def llr(x_soft, gains: EffectiveGainGrid) -> SoftBitGrid:
    """Max-log LLRs of both bits and the matching P(b = 1).

    LLR(b0) = -2 sqrt(2) G Re(X~) / eps^2 and likewise with Im for b1.
    Erased cells (eps^2 = 0) emit LLR 0, i.e. no information.
    """
    x_soft = np.asarray(x_soft)
    scale = np.where(gains.eps2 > 0,
                     -_TWO_SQRT2 * gains.g / np.where(gains.eps2 > 0, gains.eps2, 1.0),
                     0.0)
    llr0 = np.clip(scale * x_soft.real, -LLR_CLAMP, LLR_CLAMP)
    llr1 = np.clip(scale * x_soft.imag, -LLR_CLAMP, LLR_CLAMP)
    llrs = np.stack([llr0, llr1], axis=-1)
    return SoftBitGrid(llr=llrs, prob1=llr_to_prob(llrs))
