"""Differentiable unrolled Wiener receiver (torch, batched, complex).

Mirrors the simulator's 6-stage parametric receiver: pilot LS +
interpolation (gamma_1), five refinement stages (mmse with sigma_i, tanh
soft decision, full-grid LS, frequency filter gamma_{i+1}, time filter
rho_i), and a final detection with sigma_L.  Filters are built with
torch.linalg.solve so gradients flow into every stage scalar and into the
correlation coefficient vectors c, d.
"""

from __future__ import annotations

import numpy as np
import torch

SOFT_SLOPE = 10.0
_HALF_SQRT2 = float(np.sqrt(2.0) / 2.0)
LLR_CLAMP = 40.0


def toeplitz_hermitian(v):
    """Batched Hermitian Toeplitz from first-row coefficients (..., N)."""
    n = v.shape[-1]
    idx = torch.arange(n, device=v.device)
    delta = idx[None, :] - idx[:, None]              # j - i
    gathered = v[..., delta.abs()]
    return torch.where(delta >= 0, gathered, gathered.conj())


def _wiener(r, noise_var):
    """R (R + v I)^{-1}, batched; commuting factors make the order free."""
    n = r.shape[-1]
    eye = torch.eye(n, dtype=r.dtype, device=r.device)
    a = r + noise_var[..., None, None] * eye
    return torch.linalg.solve(a, r)


def _interp_operator(r_f, gamma1):
    """(R_f)_{:,::2} [(R_f)_{::2,::2} + gamma_1^2 I]^{-1}, batched."""
    b = r_f[..., ::2, ::2]
    p = b.shape[-1]
    eye = torch.eye(p, dtype=r_f.dtype, device=r_f.device)
    a = b + (gamma1**2)[..., None, None] * eye
    rhs = r_f[..., :, ::2].conj().transpose(-2, -1)
    return torch.linalg.solve(a.conj().transpose(-2, -1), rhs).conj().transpose(-2, -1)


def mmse_detect(h, y, noise_var):
    """Per-cell detection h^H y / (||h||^2 + v); h, y are (B, F, S, Nr)."""
    energy = (h.real**2 + h.imag**2).sum(dim=-1)
    num = (h.conj() * y).sum(dim=-1)
    return num / (energy + noise_var[..., None, None])


def soft_decision(x, slope=SOFT_SLOPE):
    return (torch.tanh(slope * x.real) + 1j * torch.tanh(slope * x.imag)) * _HALF_SQRT2


def unrolled_forward(y, x_pilot, gamma, sigma, rho, c, d, slope=SOFT_SLOPE):
    """Run the unrolled receiver.

    Shapes: y (B, F, S, Nr) complex, x_pilot (B, F/2) complex, gamma and
    sigma (B, L), rho (B, L-1), c (B, F), d (B, S).  Returns
    (x_soft (B, F, S), h_est (B, F, S, Nr)).
    """
    num_stages = gamma.shape[-1]
    s_dim = y.shape[2]

    r_f = toeplitz_hermitian(c)
    r_s = toeplitz_hermitian(d)

    w1 = _interp_operator(r_f, gamma[:, 0])
    h_ls_pilot = y[:, ::2, 0, :] * x_pilot.conj()[:, :, None]
    h_col = torch.einsum("bfp,bpn->bfn", w1, h_ls_pilot)
    h = h_col[:, :, None, :].expand(-1, -1, s_dim, -1)

    for i in range(num_stages - 1):
        x_tilde = mmse_detect(h, y, sigma[:, i] ** 2)
        x_hat = soft_decision(x_tilde, slope)
        mag = x_hat.abs()
        x_hat = torch.where(mag < 1e-12, torch.full_like(x_hat, 1e-12), x_hat)
        h_ls = y / x_hat[:, :, :, None]
        w_f = _wiener(r_f, gamma[:, i + 1] ** 2)
        w_s = _wiener(r_s, rho[:, i] ** 2)
        h = torch.einsum("bfg,bgsn->bfsn", w_f, h_ls)
        h = torch.einsum("bfsn,bst->bftn", h, w_s)

    x_soft = mmse_detect(h, y, sigma[:, -1] ** 2)
    return x_soft, h


def _raw_llr(x_soft, h_est, sigma_last):
    energy = (h_est.real**2 + h_est.imag**2).sum(dim=-1)
    g = energy / (energy + (sigma_last**2)[..., None, None])
    eps2 = torch.clamp(g * (1.0 - g), min=1e-12)
    scale = -2.0 * np.sqrt(2.0) * g / eps2
    return torch.stack([scale * x_soft.real, scale * x_soft.imag], dim=-1)


def llr_grid(x_soft, h_est, sigma_last):
    """Max-log LLRs of both bits from the final detection, (B, F, S, 2),
    clamped for probability use."""
    return torch.clamp(_raw_llr(x_soft, h_est, sigma_last), -LLR_CLAMP, LLR_CLAMP)


def llr_bce_loss(x_soft, h_est, sigma_last, bits):
    """Binary cross entropy of the LLR-derived bit probabilities.

    Uses the raw LLR with the logit-stable formulation: clamping first
    would zero the gradient wherever the receiver is confident, which at
    high SNR is every cell.
    """
    llr = _raw_llr(x_soft, h_est, sigma_last)
    return torch.nn.functional.binary_cross_entropy_with_logits(llr, bits)
