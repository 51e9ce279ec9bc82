"""Hypernetworks inferring the unrolled receiver's parameters from data.

Three networks consume the stacked input Z: the scalar head produces the
17 stage scalars in the order (gamma_1, sigma_1, gamma_2, rho_1, ...,
sigma_L); the two correlation heads share one architecture and produce the
frequency vector c (average over the time axis) and the time vector d
(average over the frequency axis), each as a (length, 2) sigmoid pair read
as real and imaginary parts and normalized so the leading coefficient is
one.
"""

from __future__ import annotations

import torch
from torch import nn

from .unrolled import unrolled_forward

NUM_STAGES = 6
NUM_SCALARS = 3 * NUM_STAGES - 1  # 17


class ScalarHypernet(nn.Module):
    """Conv2d -> PReLU -> global average -> Linear -> softplus (positive)."""

    def __init__(self, in_channels=18, width=16):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, width, 3, padding=1)
        self.act = nn.PReLU()
        self.linear = nn.Linear(width, NUM_SCALARS)

    def forward(self, z):
        h = self.act(self.conv(z))
        h = h.mean(dim=(2, 3))
        return nn.functional.softplus(self.linear(h)) + 1e-4


class _ResBlock(nn.Module):
    """Two dilated 3x3 conv/BN/ReLU stages with a projection shortcut."""

    def __init__(self, cin, cout, dilation):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=dilation, dilation=dilation, bias=False),
            nn.BatchNorm2d(cout), nn.ReLU(inplace=True),
            nn.Conv2d(cout, cout, 3, padding=dilation, dilation=dilation, bias=False),
            nn.BatchNorm2d(cout),
        )
        self.short = nn.Identity() if cin == cout else nn.Conv2d(cin, cout, 1, bias=False)
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        return self.act(self.body(x) + self.short(x))


class CorrelationHypernet(nn.Module):
    """Conv stack ending in a sigmoid pair, averaged over one grid axis.

    ``axis="time"`` averages over the symbol dimension and yields (B, F, 2)
    for the frequency coefficients; ``axis="freq"`` averages over
    subcarriers and yields (B, S, 2) for the time coefficients.
    """

    PLAN = ((64, (1, 1)), (128, (2, 3)), (256, (3, 6)),
            (128, (2, 3)), (64, (1, 1)), (64, (1, 1)))

    def __init__(self, axis, in_channels=18):
        super().__init__()
        if axis not in ("time", "freq"):
            raise ValueError("axis must be 'time' or 'freq'")
        self.axis = axis
        layers = [nn.Conv2d(in_channels, 64, 3, padding=1, bias=False)]
        channels = 64
        for cout, dilation in self.PLAN:
            layers.append(_ResBlock(channels, cout, dilation))
            channels = cout
        layers.append(nn.Conv2d(channels, 2, 1))
        self.stack = nn.Sequential(*layers)

    def forward(self, z):
        out = torch.sigmoid(self.stack(z))          # (B, 2, F, S)
        out = out.mean(dim=3 if self.axis == "time" else 2)
        return out.permute(0, 2, 1)                  # (B, length, 2)


def coefficients_from_head(out):
    """(B, N, 2) sigmoid pairs -> complex coefficients with c[0] = 1."""
    c = torch.complex(out[..., 0], out[..., 1])
    lead = c[:, :1]
    lead = lead + 1e-12 * (lead.abs() < 1e-9)
    return c / lead


def unpack_scalars(raw):
    """Order (gamma_1, sigma_1, gamma_2, rho_1, ..., sigma_L) -> three vectors."""
    b = raw.shape[0]
    gamma = torch.empty(b, NUM_STAGES, dtype=raw.dtype, device=raw.device)
    sigma = torch.empty(b, NUM_STAGES, dtype=raw.dtype, device=raw.device)
    rho = torch.empty(b, NUM_STAGES - 1, dtype=raw.dtype, device=raw.device)
    gamma[:, 0] = raw[:, 0]
    pos = 1
    for i in range(NUM_STAGES - 1):
        sigma[:, i] = raw[:, pos]
        gamma[:, i + 1] = raw[:, pos + 1]
        rho[:, i] = raw[:, pos + 2]
        pos += 3
    sigma[:, -1] = raw[:, pos]
    return gamma, sigma, rho


class HyperWienerNet(nn.Module):
    """Hypernetworks plus the differentiable unrolled receiver."""

    def __init__(self, in_channels=18):
        super().__init__()
        self.scalar_head = ScalarHypernet(in_channels)
        self.freq_head = CorrelationHypernet("time", in_channels)
        self.time_head = CorrelationHypernet("freq", in_channels)

    def infer_parameters(self, z):
        gamma, sigma, rho = unpack_scalars(self.scalar_head(z))
        c = coefficients_from_head(self.freq_head(z))
        d = coefficients_from_head(self.time_head(z))
        return gamma, sigma, rho, c, d

    def forward(self, z, y, x_pilot):
        gamma, sigma, rho, c, d = self.infer_parameters(z)
        x_soft, h_est = unrolled_forward(y, x_pilot, gamma, sigma, rho, c, d)
        return x_soft, h_est, sigma[:, -1]
