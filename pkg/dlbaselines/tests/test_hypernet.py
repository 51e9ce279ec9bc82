"""Hypernetwork heads: shapes, positivity, unpacking order, normalization."""

import numpy as np
import pytest
import torch

from dlbaselines.hypernet import (NUM_SCALARS, CorrelationHypernet,
                                  HyperWienerNet, ScalarHypernet,
                                  coefficients_from_head, unpack_scalars)


def test_scalar_head_output():
    torch.manual_seed(0)
    head = ScalarHypernet()
    out = head(torch.randn(3, 18, 24, 12))
    assert out.shape == (3, NUM_SCALARS) == (3, 17)
    assert torch.all(out > 0)


def test_unpack_scalars_order():
    raw = torch.arange(17, dtype=torch.float32)[None]
    gamma, sigma, rho, = unpack_scalars(raw)
    # order (g1, s1, g2, r1, s2, g3, r2, ..., s6)
    assert gamma[0].tolist() == [0, 2, 5, 8, 11, 14]
    assert sigma[0].tolist() == [1, 4, 7, 10, 13, 16]
    assert rho[0].tolist() == [3, 6, 9, 12, 15]


def test_correlation_head_shapes():
    torch.manual_seed(1)
    freq = CorrelationHypernet("time")
    time = CorrelationHypernet("freq")
    z = torch.randn(2, 18, 24, 12)
    with torch.no_grad():
        cf = freq(z)
        dt = time(z)
    assert cf.shape == (2, 24, 2)
    assert dt.shape == (2, 12, 2)
    assert float(cf.min()) >= 0.0 and float(cf.max()) <= 1.0


def test_correlation_head_rejects_bad_axis():
    with pytest.raises(ValueError):
        CorrelationHypernet("antenna")


def test_coefficients_normalized_and_bounded():
    torch.manual_seed(2)
    head = CorrelationHypernet("time")
    z = torch.randn(2, 18, 24, 12)
    with torch.no_grad():
        c = coefficients_from_head(head(z))
    assert c.shape == (2, 24)
    assert torch.allclose(c[:, 0], torch.ones_like(c[:, 0]))
    # sigmoid pairs bound |c_k| by sqrt(2) before normalization
    raw = head(z)
    mag = torch.complex(raw[..., 0], raw[..., 1]).abs()
    assert float(mag.max()) <= np.sqrt(2) + 1e-6


def test_full_model_end_to_end():
    torch.manual_seed(3)
    model = HyperWienerNet()
    z = torch.randn(2, 18, 24, 12)
    y = (torch.randn(2, 24, 12, 4) + 1j * torch.randn(2, 24, 12, 4)).to(torch.complex64)
    xp = torch.full((2, 12), (1 + 1j) * np.sqrt(2) / 2, dtype=torch.complex64)
    with torch.no_grad():
        x_soft, h_est, sigma_last = model(z, y, xp)
    assert x_soft.shape == (2, 24, 12)
    assert h_est.shape == (2, 24, 12, 4)
    assert torch.all(sigma_last > 0)
    assert torch.isfinite(x_soft.real).all() and torch.isfinite(x_soft.imag).all()
