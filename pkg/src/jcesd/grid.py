"""QPSK constellation, bit mapping, and the pilot layout shared by all stages.

Conventions used throughout the package:

* grids are indexed ``(f, s, n_r)`` = (subcarrier, OFDM symbol, rx antenna);
* ``sign(0) = +1``, so every mapping below is total and deterministic;
* bit 0 encodes the real part, bit 1 the imaginary part of a symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HALF_SQRT2 = np.sqrt(2.0) / 2.0

#: The four constellation points, indexed [m, n] by the two bits.
CONSTELLATION = np.array(
    [
        [HALF_SQRT2 + 1j * HALF_SQRT2, HALF_SQRT2 - 1j * HALF_SQRT2],
        [-HALF_SQRT2 + 1j * HALF_SQRT2, -HALF_SQRT2 - 1j * HALF_SQRT2],
    ]
)


def sign_pos(x):
    """Elementwise sign with the sign(0) = +1 convention."""
    return np.where(np.asarray(x) < 0, -1.0, 1.0)


def bits_to_symbols(bits):
    """Map bit pairs ``(..., 2)`` to unit-modulus QPSK symbols ``(...)``.

    Bit values (m, n) map to (1-2m)*sqrt(2)/2 + (1-2n)*sqrt(2)/2 * 1j.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] != 2:
        raise ValueError(f"expected trailing bit-pair axis of size 2, got {bits.shape}")
    m = bits[..., 0]
    n = bits[..., 1]
    return (1 - 2 * m) * HALF_SQRT2 + 1j * ((1 - 2 * n) * HALF_SQRT2)


def bits_to_symbol(m, n):
    """Scalar form of :func:`bits_to_symbols`."""
    if m not in (0, 1) or n not in (0, 1):
        raise ValueError(f"bits must be 0 or 1, got ({m}, {n})")
    return complex(bits_to_symbols(np.array([m, n])))


def symbols_to_bits(x):
    """Recover the bit pair of each symbol; returns an int8 array ``(..., 2)``.

    b0 = (1 - sign(Re x)) / 2 and b1 = (1 - sign(Im x)) / 2; ties (zero real
    or imaginary part) resolve to bit 0 via sign(0) = +1.
    """
    x = np.asarray(x)
    b0 = (1 - sign_pos(x.real)) / 2
    b1 = (1 - sign_pos(x.imag)) / 2
    return np.stack([b0, b1], axis=-1).astype(np.int8)


def symbol_to_bits(x):
    """Scalar form of :func:`symbols_to_bits`."""
    b = symbols_to_bits(np.asarray(complex(x)))
    return int(b[..., 0]), int(b[..., 1])


def hard_project(x):
    """Project arbitrary complex values onto the nearest constellation point.

    Idempotent on constellation points; quadrant boundaries resolve with
    sign(0) = +1.
    """
    x = np.asarray(x)
    return (sign_pos(x.real) + 1j * sign_pos(x.imag)) * HALF_SQRT2


def bit_error_count(est, truth):
    """Hamming distance between two bit grids and the total bit count."""
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"bit grid shapes differ: {est.shape} vs {truth.shape}")
    errors = int(np.count_nonzero(est != truth))
    return errors, est.size


@dataclass(frozen=True)
class PilotPattern:
    """Single-symbol pilot layout: even subcarriers of OFDM symbol 0.

    ``num_subcarriers`` is the grid height F; the pilot subcarriers are the
    even indices 0, 2, ..., F-2.
    """

    num_subcarriers: int
    symbol_index: int = 0

    def __post_init__(self):
        if self.num_subcarriers < 2 or self.num_subcarriers % 2 != 0:
            raise ValueError(f"F must be a positive even integer, got {self.num_subcarriers}")
        if self.symbol_index != 0:
            raise ValueError("only the single-symbol (s=0) pilot configuration is supported")

    @property
    def subcarrier_indices(self):
        return np.arange(0, self.num_subcarriers, 2)

    @property
    def count(self):
        return self.num_subcarriers // 2

    def data_mask(self, num_symbols):
        """Boolean (F, S) mask, True at payload cells (pilot cells excluded)."""
        mask = np.ones((self.num_subcarriers, num_symbols), dtype=bool)
        mask[self.subcarrier_indices, self.symbol_index] = False
        return mask


def pilot_sequence(count, seed=None):
    """Pilot symbol values for ``count`` pilot positions.

    Default (seed None) is the fixed all-(sqrt(2)/2)(1+1j) sequence; a seed
    produces a reproducible pseudo-random QPSK sequence instead.
    """
    if seed is None:
        return np.full(count, HALF_SQRT2 * (1 + 1j), dtype=complex)
    rng = np.random.default_rng(seed)
    return bits_to_symbols(rng.integers(0, 2, size=(count, 2)))
