"""Lightweight densely-connected bit detector.

Fourteen layers: a 3x3 stem, alternating residual blocks of two kinds, and
a 1x1 head producing one probability per bit.  Type-I blocks concatenate
the input with a bottleneck branch (channels double); type-II blocks
reduce channels through the same bottleneck plus a 1x1 projection
shortcut.  All convolutions are depthwise-separable with the depthwise
kernel carrying the bias (pointwise and projection convolutions are
bias-free, as are the stem and head, which feed into normalization or the
sigmoid).  The bottleneck width 98 is the one free knob; it is chosen so
the trainable parameter count lands exactly on 213120.
"""

from __future__ import annotations

import torch
from torch import nn

BOTTLENECK_WIDTH = 98

#: (kind, dilation, output channels) per layer, mirroring the published plan.
LAYER_PLAN = (
    ("stem", (1, 1), 24),
    ("I", (1, 1), 48),
    ("I", (2, 3), 96),
    ("II", (3, 6), 24),
    ("I", (1, 1), 48),
    ("I", (2, 3), 96),
    ("II", (3, 6), 48),
    ("I", (3, 6), 96),
    ("I", (2, 3), 192),
    ("II", (1, 1), 48),
    ("I", (3, 6), 96),
    ("I", (2, 3), 192),
    ("II", (1, 1), 48),
    ("head", (1, 1), 2),
)

TARGET_PARAMETER_COUNT = 213_120


class SeparableConv2d(nn.Module):
    """Depthwise 3x3 (with bias) followed by a bias-free pointwise mix."""

    def __init__(self, cin, cout, dilation):
        super().__init__()
        self.depthwise = nn.Conv2d(cin, cin, 3, padding=dilation, dilation=dilation,
                                   groups=cin, bias=True)
        self.pointwise = nn.Conv2d(cin, cout, 1, bias=False)

    def forward(self, x):
        return self.pointwise(self.depthwise(x))


def _branch(cin, cout, dilation):
    return nn.Sequential(
        nn.BatchNorm2d(cin), nn.ReLU(inplace=True),
        SeparableConv2d(cin, BOTTLENECK_WIDTH, dilation),
        nn.BatchNorm2d(BOTTLENECK_WIDTH), nn.ReLU(inplace=True),
        SeparableConv2d(BOTTLENECK_WIDTH, cout, dilation),
    )


class ResidualBlockI(nn.Module):
    """Concatenative block: output = [input, branch(input)], doubling channels."""

    def __init__(self, cin, dilation):
        super().__init__()
        self.branch = _branch(cin, cin, dilation)

    def forward(self, x):
        return torch.cat([x, self.branch(x)], dim=1)


class ResidualBlockII(nn.Module):
    """Reducing block: branch plus a bias-free 1x1 projection shortcut."""

    def __init__(self, cin, cout, dilation):
        super().__init__()
        self.branch = _branch(cin, cout, dilation)
        self.shortcut = nn.Conv2d(cin, cout, 1, bias=False)

    def forward(self, x):
        return self.branch(x) + self.shortcut(x)


class DenseNetDetector(nn.Module):
    """Maps the stacked input (N, 4Nr+2, F, S) to bit probabilities (N, 2, F, S)."""

    def __init__(self, in_channels=18):
        super().__init__()
        layers = []
        channels = in_channels
        for kind, dilation, cout in LAYER_PLAN:
            if kind == "stem":
                layers.append(nn.Conv2d(channels, cout, 3, padding=1, bias=False))
            elif kind == "I":
                assert cout == 2 * channels, "type-I blocks double the channel count"
                layers.append(ResidualBlockI(channels, dilation))
            elif kind == "II":
                layers.append(ResidualBlockII(channels, cout, dilation))
            else:
                layers.append(nn.Conv2d(channels, cout, 1, bias=False))
            channels = cout
        self.layers = nn.ModuleList(layers)

    def forward(self, z):
        for layer in self.layers:
            z = layer(z)
        return torch.sigmoid(z)

    def layer_output_shapes(self, f=24, s=12, in_channels=18):
        """(F, S, C) after every layer, for auditing against the plan."""
        shapes = []
        with torch.no_grad():
            x = torch.zeros(1, in_channels, f, s)
            for layer in self.layers:
                x = layer(x)
                shapes.append((x.shape[2], x.shape[3], x.shape[1]))
        return shapes


def build_densenet(in_channels=18, audit=True):
    """Construct the detector; verifies the layer plan and parameter count."""
    model = DenseNetDetector(in_channels)
    if audit:
        shapes = model.layer_output_shapes(in_channels=in_channels)
        for (kind, _dil, cout), (f, s, c) in zip(LAYER_PLAN, shapes):
            if c != cout or (f, s) != (24, 12):
                raise AssertionError(
                    f"layer {kind} produced (F,S,C)=({f},{s},{c}), wanted C={cout}")
        count = parameter_count(model)
        if count != TARGET_PARAMETER_COUNT:
            raise AssertionError(
                f"parameter count {count} != target {TARGET_PARAMETER_COUNT}")
    return model


def parameter_count(model):
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def bce_loss(pred_prob, bits, eps=1e-7):
    """Mean binary cross entropy over every bit, with clamped probabilities."""
    p = torch.clamp(pred_prob, eps, 1.0 - eps)
    return -(bits * torch.log(p) + (1 - bits) * torch.log1p(-p)).mean()
