"""Kronecker-correlated Rayleigh channels and slot synthesis.

The channel grid H (F, S, Nr) has i.i.d. antenna slices; each vectorized
slice is zero-mean complex Gaussian with covariance R_s (x) R_f, where R_f
and R_s are Hermitian Toeplitz matrices built from correlation coefficient
vectors c (frequency) and d (time).  Received slots follow
Y = H * X + n with n ~ CN(0, sigma^2 I) per antenna.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import j0

from .grid import PilotPattern, bits_to_symbols, pilot_sequence, symbols_to_bits

# (CP + FFT) samples of one OFDM symbol over the sample rate at 30 kHz
# subcarrier spacing with a 2048-point FFT: 2192 / (30000 * 2048) s.
CP_PLUS_SYMBOL_SAMPLES = 2192
SAMPLE_RATE_HZ = 30_000 * 2048
DEFAULT_SYMBOL_DURATION_S = CP_PLUS_SYMBOL_SAMPLES / SAMPLE_RATE_HZ

EIG_NEG_TOL = -1e-8


class CorrelationError(ValueError):
    """A correlation matrix is not decomposable (eigenvalue below tolerance)."""


@dataclass(frozen=True)
class ChannelParams:
    """Physical configuration of the simulated link (Kronecker model)."""

    doppler_hz: float = 90.0
    delay_spread_s: float = 100e-9
    subcarrier_spacing_hz: float = 30_000.0
    symbol_duration_s: float = DEFAULT_SYMBOL_DURATION_S
    F: int = 24
    S: int = 12
    Nr: int = 4

    def __post_init__(self):
        for name in ("doppler_hz", "delay_spread_s", "subcarrier_spacing_hz", "symbol_duration_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.F < 2 or self.F % 2 != 0:
            raise ValueError("F must be even and >= 2 (pilot pattern requires it)")
        if self.S < 1 or self.Nr < 1:
            raise ValueError("S and Nr must be positive")


@dataclass(frozen=True)
class CorrelationSpec:
    """Correlation coefficient vectors: c (length F) and d (length S)."""

    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex)
        d = np.asarray(self.d, dtype=complex)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        for name, v in (("c", c), ("d", d)):
            if v.ndim != 1 or v.size < 1:
                raise ValueError(f"{name} must be a nonempty vector")
            if abs(v[0] - 1.0) > 1e-9:
                raise ValueError(f"{name}[0] must be 1 (unit-variance channel), got {v[0]}")
            if np.any(np.abs(v) > 1 + 1e-9):
                raise ValueError(f"|{name}[k]| must not exceed 1")


@dataclass(frozen=True)
class Slot:
    """One simulated transmission: the dataset unit."""

    x: np.ndarray        # (F, S) transmitted symbols
    bits: np.ndarray     # (F, S, 2) transmitted bits
    h: np.ndarray        # (F, S, Nr) true channel
    y: np.ndarray        # (F, S, Nr) received samples
    sigma2: float
    snr_db: float
    doppler_hz: float
    seed: int


def toeplitz_hermitian(v):
    """Hermitian Toeplitz matrix with first row v: M[i, j] = v[j-i] (j >= i).

    Entries below the diagonal are the conjugate reflection; v[0] must be
    real (up to 1e-12) so the result is exactly Hermitian.
    """
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise ValueError("correlation vector must be 1-D")
    if abs(v[0].imag) > 1e-12:
        raise ValueError(f"v[0] must be real, got {v[0]}")
    n = v.size
    idx = np.subtract.outer(np.arange(n), np.arange(n))  # i - j
    m = np.where(idx <= 0, v[np.abs(idx)], np.conj(v[np.abs(idx)]))
    m[np.diag_indices(n)] = v[0].real
    return m


def jakes_time_corr(params: ChannelParams):
    """Time correlation d[k] = J0(2 pi f_D k T) for symbol spacing T."""
    k = np.arange(params.S)
    return j0(2 * np.pi * params.doppler_hz * k * params.symbol_duration_s).astype(complex)


def exp_pdp_freq_corr(params: ChannelParams):
    """Frequency correlation of an exponential power-delay profile.

    c[k] = 1 / (1 + 2j pi k df tau) for subcarrier spacing df and RMS delay
    spread tau.
    """
    k = np.arange(params.F)
    return 1.0 / (1.0 + 2j * np.pi * k * params.subcarrier_spacing_hz * params.delay_spread_s)


def correlation_for(params: ChannelParams) -> CorrelationSpec:
    """Default correlation spec for a parameter set (Jakes time, exp-PDP frequency)."""
    return CorrelationSpec(c=exp_pdp_freq_corr(params), d=jakes_time_corr(params))


def psd_eigh(r, strict=True):
    """Eigendecomposition of a Hermitian correlation matrix with flooring.

    Returns (eigenvalues, eigenvectors) with negative eigenvalues floored at
    zero.  With ``strict`` (the default for matrices handed directly to the
    sampler), raises :class:`CorrelationError` when an eigenvalue lies below
    -1e-8 before flooring: the matrix is materially indefinite, not just
    numerically noisy.  ``strict=False`` floors unconditionally, which is
    how user-supplied correlation vectors are regularized.
    """
    r = np.asarray(r)
    lam, u = np.linalg.eigh((r + r.conj().T) / 2)
    if strict and lam.min() < EIG_NEG_TOL:
        raise CorrelationError(
            f"correlation matrix has eigenvalue {lam.min():.3e} below tolerance {EIG_NEG_TOL}"
        )
    return np.clip(lam, 0.0, None), u


def correlation_matrix(v):
    """Toeplitz correlation matrix from coefficients, PSD-floored, unit diagonal."""
    r = toeplitz_hermitian(v)
    lam, u = psd_eigh(r, strict=False)
    if lam.min() > 0:
        return r
    r = (u * lam) @ u.conj().T
    d = np.sqrt(np.clip(np.real(np.diag(r)), 1e-30, None))
    r = r / np.outer(d, d)
    return (r + r.conj().T) / 2


def correlation_matrices(spec: CorrelationSpec):
    """(R_f, R_s) for a correlation spec."""
    return correlation_matrix(spec.c), correlation_matrix(spec.d)


def _factor(r):
    """A with A A^H = R (eigenvector basis times sqrt eigenvalues)."""
    lam, u = psd_eigh(r)
    return u * np.sqrt(lam)


@functools.lru_cache(maxsize=32)
def _cached_factors(params: ChannelParams):
    spec = correlation_for(params)
    r_f, r_s = correlation_matrices(spec)
    return _factor(r_f), _factor(r_s)


def sample_channel(r_f, r_s, nr, rng):
    """Draw H (F, S, Nr) with i.i.d. antenna slices, vec cov R_s (x) R_f.

    Realized as H_i = A_f G_i A_s^T with G_i i.i.d. CN(0, 1) and
    A A^H = R for each dimension.
    """
    a_f = _factor(r_f)
    a_s = _factor(r_s)
    return _sample_channel_from_factors(a_f, a_s, nr, rng)


def _sample_channel_from_factors(a_f, a_s, nr, rng):
    f, s = a_f.shape[0], a_s.shape[0]
    g = (rng.standard_normal((nr, f, s)) + 1j * rng.standard_normal((nr, f, s))) / np.sqrt(2)
    h = np.einsum("fk,nkl,sl->fsn", a_f, g, a_s)
    return h


def snr_db_to_sigma2(snr_db):
    """Per-antenna noise variance for unit-energy symbols and channels."""
    return float(10.0 ** (-float(snr_db) / 10.0))


def slot_seed(master_seed, index):
    """Independent 63-bit per-slot seed derived from (master seed, slot index)."""
    state = np.random.SeedSequence((int(master_seed), int(index))).generate_state(2, np.uint64)
    return int((int(state[0]) << 32 ^ int(state[1])) & (2**63 - 1))


def synthesize_slot(params: ChannelParams, snr_db, rng=None, seed=0,
                    correlation: CorrelationSpec | None = None,
                    x_pilot=None) -> Slot:
    """Simulate one slot: uniform payload bits, pilots, channel, noise.

    If ``rng`` is None it is derived from ``seed``, so a slot is exactly
    reproducible from (params, snr_db, seed).  ``correlation`` overrides the
    default Jakes / exponential-PDP model; ``x_pilot`` overrides the default
    pilot values.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    pilots = PilotPattern(params.F)
    if x_pilot is None:
        x_pilot = pilot_sequence(pilots.count)
    x_pilot = np.asarray(x_pilot, dtype=complex)
    if x_pilot.shape != (pilots.count,):
        raise ValueError(f"pilot sequence must have shape ({pilots.count},)")

    bits = rng.integers(0, 2, size=(params.F, params.S, 2))
    x = bits_to_symbols(bits)
    x[pilots.subcarrier_indices, pilots.symbol_index] = x_pilot
    bits = bits.copy()
    bits[pilots.subcarrier_indices, pilots.symbol_index, :] = symbols_to_bits(x_pilot)

    if correlation is None:
        a_f, a_s = _cached_factors(params)
    else:
        r_f, r_s = correlation_matrices(correlation)
        a_f, a_s = _factor(r_f), _factor(r_s)
    h = _sample_channel_from_factors(a_f, a_s, params.Nr, rng)

    sigma2 = snr_db_to_sigma2(snr_db)
    noise = (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) * np.sqrt(sigma2 / 2)
    y = h * x[:, :, None] + noise
    return Slot(x=x, bits=bits.astype(np.int8), h=h, y=y, sigma2=sigma2,
                snr_db=float(snr_db), doppler_hz=params.doppler_hz, seed=int(seed))
