"""DenseNet architecture audit and loss tests."""

import numpy as np
import pytest
import torch

from dlbaselines.densenet import (LAYER_PLAN, TARGET_PARAMETER_COUNT, bce_loss,
                                  build_densenet, parameter_count)


def test_parameter_count_exact():
    model = build_densenet()
    assert parameter_count(model) == TARGET_PARAMETER_COUNT == 213_120


def test_layer_shapes_match_plan():
    model = build_densenet()
    shapes = model.layer_output_shapes()
    assert len(shapes) == 14
    expected_channels = [c for _, _, c in LAYER_PLAN]
    assert [c for _, _, c in shapes] == expected_channels
    assert all((f, s) == (24, 12) for f, s, _ in shapes)
    assert shapes[-1] == (24, 12, 2)


def test_all_zero_input_gives_sane_probabilities():
    model = build_densenet()
    model.eval()
    with torch.no_grad():
        out = model(torch.zeros(1, 18, 24, 12))
    assert out.shape == (1, 2, 24, 12)
    assert torch.isfinite(out).all()
    assert float(out.min()) > 0.0 and float(out.max()) < 1.0


def test_audit_rejects_wrong_count(monkeypatch):
    import dlbaselines.densenet as dn

    monkeypatch.setattr(dn, "TARGET_PARAMETER_COUNT", 1234)
    with pytest.raises(AssertionError, match="parameter count"):
        dn.build_densenet()


def test_bce_uniform_prediction():
    bits = torch.randint(0, 2, (4, 2, 24, 12)).float()
    p = torch.full_like(bits, 0.5)
    assert float(bce_loss(p, bits)) == pytest.approx(np.log(2), abs=1e-6)


def test_bce_perfect_prediction_near_zero():
    bits = torch.randint(0, 2, (4, 2, 24, 12)).float()
    assert float(bce_loss(bits, bits)) < 1e-5


def test_bce_single_cell_value():
    bits = torch.ones(1, 1, 1, 1)
    p = torch.full_like(bits, float(np.exp(-1.0)))
    assert float(bce_loss(p, bits)) == pytest.approx(1.0, abs=1e-6)


def test_gradients_flow():
    model = build_densenet()
    z = torch.randn(2, 18, 24, 12)
    bits = torch.randint(0, 2, (2, 2, 24, 12)).float()
    loss = bce_loss(model(z), bits)
    loss.backward()
    assert all(p.grad is not None and torch.isfinite(p.grad).all()
               for p in model.parameters())
