"""Classical receivers: the non-iterative LS/Wiener/MMSE chain, the
iterative decision-directed scheme, and the alternating pilot-based noise
variance estimator.

All Wiener filters are applied through the Hermitian eigendecomposition of
the correlation matrix with eigenvalue weights lam / (lam + sigma^2); the
0/0 case at sigma^2 = 0 is taken as 0, i.e. the pseudo-inverse limit.  This
makes every filter a contraction (spectral norm <= 1) and keeps the chain
well defined for rank-deficient correlation matrices (e.g. a static
channel, where R_s is the all-ones matrix).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import psd_eigh
from .grid import PilotPattern, hard_project, symbols_to_bits

PILOT_MODULUS_TOL = 1e-9
DEGENERATE_TOL = 1e-30


class DegenerateChannelError(ValueError):
    """MMSE detection hit a cell with vanishing channel energy and noise."""


RCOND = 1e-12


def shrinkage_weights(lam, noise_var, rcond=RCOND):
    """Eigenvalue weights lam / (lam + v) with the pseudo-inverse limit.

    At v = 0, eigenvalues at or below rcond * max(lam) count as zero rank
    (weight 0) and the rest pass unchanged; this is the projector onto the
    numerical range of the correlation matrix.
    """
    lam = np.asarray(lam)
    if noise_var > 0:
        return lam / (lam + noise_var)
    cutoff = rcond * (lam.max() if lam.size else 0.0)
    return (lam > cutoff).astype(float)


def inverse_weights(lam, noise_var, rcond=RCOND):
    """Eigenvalue weights 1 / (lam + v) with the pseudo-inverse limit at v = 0."""
    lam = np.asarray(lam)
    if noise_var > 0:
        return 1.0 / (lam + noise_var)
    cutoff = rcond * (lam.max() if lam.size else 0.0)
    keep = lam > cutoff
    return np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)


@dataclass(frozen=True)
class ReceiverConfig:
    """Configuration shared by the classical receivers.

    R_f and R_s are the correlation matrices the receiver assumes; in the
    benchmark they are the true simulation matrices (matched receiver).
    """

    R_f: np.ndarray
    R_s: np.ndarray
    iterations: int = 6
    noise_mode: str = "known"          # "known" | "estimated"
    sigma2_init: float = 1.0
    noise_iters: int = 10

    def __post_init__(self):
        if not 0 <= self.iterations <= 64:
            raise ValueError("iterations must be in [0, 64]")
        if self.noise_mode not in ("known", "estimated"):
            raise ValueError(f"unknown noise_mode {self.noise_mode!r}")
        if self.sigma2_init <= 0:
            raise ValueError("sigma2_init must be positive")
        if self.noise_iters < 1:
            raise ValueError("noise_iters must be >= 1")


@dataclass
class ReceiverOutput:
    h_est: np.ndarray      # (F, S, Nr)
    x_soft: np.ndarray     # (F, S) pre-projection MMSE output
    bits_hard: np.ndarray  # (F, S, 2)
    sigma2_used: float


def _check_pilot_modulus(x_pilot):
    x_pilot = np.asarray(x_pilot, dtype=complex)
    dev = np.abs(np.abs(x_pilot) - 1.0)
    if dev.max() > PILOT_MODULUS_TOL:
        raise ValueError(f"pilot symbols must be unit modulus (max deviation {dev.max():.3e})")
    return x_pilot


def ls_pilot_estimate(y, pilots: PilotPattern, x_pilot):
    """LS channel estimate at the pilot cells: H~ = Y / X, shape (F/2, Nr)."""
    x_pilot = _check_pilot_modulus(x_pilot)
    y_p = np.asarray(y)[pilots.subcarrier_indices, pilots.symbol_index, :]
    return y_p * np.conj(x_pilot)[:, None]


def wiener_filter_matrix(r, sigma2):
    """W = R (R + sigma^2 I)^{-1} via eigendecomposition (contraction)."""
    lam, u = psd_eigh(r)
    return (u * shrinkage_weights(lam, sigma2)) @ u.conj().T


def wiener_interp_matrix(r_f, sigma2):
    """Pilot-to-grid interpolator (R_f)_{:,::2} [(R_f)_{::2,::2} + s^2 I]^{-1}."""
    r_f = np.asarray(r_f)
    b = r_f[::2, ::2]
    lam, u = psd_eigh(b)
    return r_f[:, ::2] @ ((u * inverse_weights(lam, sigma2)) @ u.conj().T)


def wiener_interp_pilots(h_ls, r_f, sigma2):
    """Interpolate the pilot LS estimate to all F subcarriers of symbol 0."""
    return wiener_interp_matrix(r_f, sigma2) @ np.asarray(h_ls)


def extrapolate_first_symbol(h_col, num_symbols):
    """Copy the first-symbol estimate to all S symbols: (F, Nr) -> (F, S, Nr)."""
    h_col = np.asarray(h_col)
    return np.repeat(h_col[:, None, :], num_symbols, axis=1)


def mmse_detect(h_est, y, sigma2):
    """Per-cell MMSE detection X~ = h^H y / (||h||^2 + sigma^2), shape (F, S)."""
    h_est = np.asarray(h_est)
    y = np.asarray(y)
    energy = np.sum(np.abs(h_est) ** 2, axis=2)
    den = energy + sigma2
    if den.min() < DEGENERATE_TOL:
        raise DegenerateChannelError(
            f"channel energy + sigma^2 fell below {DEGENERATE_TOL} at some cell"
        )
    return np.einsum("fsn,fsn->fs", np.conj(h_est), y) / den


def ls_full(y, x_hat):
    """Full-grid LS re-estimate H~ = Y / X^ for decided symbols (unit modulus)."""
    x_hat = np.asarray(x_hat)
    if np.any(np.abs(x_hat) < 1e-12):
        raise ValueError("decided symbols contain (near-)zeros; cannot divide")
    return np.asarray(y) / x_hat[:, :, None]


def wiener_freq(h_ls, r_f, sigma2):
    """Frequency-dimension Wiener filter, applied per antenna from the left."""
    w = wiener_filter_matrix(r_f, sigma2)
    return np.einsum("fg,gsn->fsn", w, np.asarray(h_ls))


def wiener_time(h_half, r_s, sigma2):
    """Time-dimension Wiener filter, applied per antenna from the right."""
    w = wiener_filter_matrix(r_s, sigma2)
    return np.einsum("fsn,st->ftn", np.asarray(h_half), w)


def estimate_noise_variance(y, pilots: PilotPattern, x_pilot, r_f,
                            sigma2_init=1.0, iters=10, normalization="paper",
                            rel_tol=1e-4):
    """Alternating pilot-based noise variance estimate.

    Alternates the pilot-submatrix Wiener estimate of the channel with the
    residual power update until ``iters`` rounds or the relative change
    drops below ``rel_tol``.  ``normalization="paper"`` divides the pilot
    residual energy by 2F (exact for Nr = 4 with F/2 pilots);
    ``"per_sample"`` divides by Nr * (F/2), unbiased in Nr.
    """
    if sigma2_init <= 0:
        raise ValueError("sigma2_init must be positive")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if normalization not in ("paper", "per_sample"):
        raise ValueError(f"unknown normalization {normalization!r}")

    x_pilot = _check_pilot_modulus(x_pilot)
    y_p = np.asarray(y)[pilots.subcarrier_indices, pilots.symbol_index, :]
    h_ls = y_p * np.conj(x_pilot)[:, None]

    f = pilots.num_subcarriers
    num_pilots, nr = y_p.shape
    if normalization == "paper":
        norm = 1.0 / (2.0 * f)
    else:
        norm = 1.0 / (nr * num_pilots)

    b = np.asarray(r_f)[::2, ::2]
    lam, u = psd_eigh(b)
    h_ls_eig = u.conj().T @ h_ls

    sigma2 = float(sigma2_init)
    for _ in range(iters):
        gain = shrinkage_weights(lam, sigma2)
        h_hat = u @ (gain[:, None] * h_ls_eig)
        resid = y_p - h_hat * x_pilot[:, None]
        new = float(np.sum(np.abs(resid) ** 2) * norm)
        new = max(new, 1e-12)
        done = abs(new - sigma2) / max(new, 1e-12) < rel_tol
        sigma2 = new
        if done:
            break
    return sigma2


def _resolve_sigma2(y, pilots, x_pilot, cfg: ReceiverConfig, sigma2_true):
    if cfg.noise_mode == "known":
        if sigma2_true is None:
            raise ValueError("noise_mode='known' requires sigma2_true")
        return float(sigma2_true)
    return estimate_noise_variance(y, pilots, x_pilot, cfg.R_f,
                                   sigma2_init=cfg.sigma2_init, iters=cfg.noise_iters)


def _initial_estimate(y, pilots, x_pilot, r_f, sigma2, num_symbols):
    h_ls = ls_pilot_estimate(y, pilots, x_pilot)
    h_col = wiener_interp_pilots(h_ls, r_f, sigma2)
    return extrapolate_first_symbol(h_col, num_symbols)


def _finalize(h_est, y, sigma2):
    x_soft = mmse_detect(h_est, y, sigma2)
    bits = symbols_to_bits(hard_project(x_soft))
    return x_soft, bits


def run_noniterative(y, pilots: PilotPattern, x_pilot, cfg: ReceiverConfig,
                     sigma2_true=None) -> ReceiverOutput:
    """Pilot LS -> Wiener interpolation -> extrapolation -> MMSE detection."""
    y = np.asarray(y)
    sigma2 = _resolve_sigma2(y, pilots, x_pilot, cfg, sigma2_true)
    h_est = _initial_estimate(y, pilots, x_pilot, cfg.R_f, sigma2, y.shape[1])
    x_soft, bits = _finalize(h_est, y, sigma2)
    return ReceiverOutput(h_est=h_est, x_soft=x_soft, bits_hard=bits, sigma2_used=sigma2)


def run_iterative(y, pilots: PilotPattern, x_pilot, cfg: ReceiverConfig,
                  sigma2_true=None) -> ReceiverOutput:
    """Decision-directed refinement of the non-iterative estimate.

    Each of the ``cfg.iterations`` rounds detects, projects to the
    constellation, re-estimates the channel over the full grid by LS, and
    smooths it with the frequency- and time-dimension Wiener filters; a
    final MMSE detection produces the returned soft symbols.  With
    ``iterations=0`` this is exactly the non-iterative receiver.
    """
    y = np.asarray(y)
    sigma2 = _resolve_sigma2(y, pilots, x_pilot, cfg, sigma2_true)
    h_est = _initial_estimate(y, pilots, x_pilot, cfg.R_f, sigma2, y.shape[1])

    w_f = wiener_filter_matrix(cfg.R_f, sigma2)
    w_s = wiener_filter_matrix(cfg.R_s, sigma2)
    for _ in range(cfg.iterations):
        x_hat = hard_project(mmse_detect(h_est, y, sigma2))
        h_ls = ls_full(y, x_hat)
        h_half = np.einsum("fg,gsn->fsn", w_f, h_ls)
        h_est = np.einsum("fsn,st->ftn", h_half, w_s)
    x_soft, bits = _finalize(h_est, y, sigma2)
    return ReceiverOutput(h_est=h_est, x_soft=x_soft, bits_hard=bits, sigma2_used=sigma2)
