"""The Wiener-unrolled receiver: a deterministic, externally parameterized
re-implementation of the iterative scheme with L = 6 detection stages.

Stage 0 interpolates the pilot LS estimate with the gamma_1 operator and
extrapolates it over the slot.  Stages 1..L-1 each run MMSE detection with
noise parameter sigma_i, take a differentiable soft decision, re-estimate
the channel by full-grid LS, and smooth with the frequency operator
gamma_{i+1} (left) and the time operator rho_i (right).  A final MMSE
detection with sigma_L produces the soft symbol output.  The scalar
consumption order is therefore (gamma_1, sigma_1, gamma_2, rho_1, ...,
sigma_L): 3L - 1 = 17 scalars, plus the correlation vectors c and d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import correlation_matrix, psd_eigh
from .grid import PilotPattern
from .receiver import (extrapolate_first_symbol, inverse_weights, ls_pilot_estimate,
                       mmse_detect, shrinkage_weights)

SOFT_SLOPE = 10.0
_HALF_SQRT2 = np.sqrt(2.0) / 2.0
PARAMS_FORMAT_VERSION = 1


class ParamsFormatError(ValueError):
    """A backbone parameter file failed to parse or validate."""


@dataclass(frozen=True)
class BackboneParams:
    """The 3L-1 stage scalars plus the correlation coefficient vectors."""

    gamma: np.ndarray  # (L,)
    sigma: np.ndarray  # (L,)
    rho: np.ndarray    # (L-1,)
    c: np.ndarray      # (F,)
    d: np.ndarray      # (S,)

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        c = np.asarray(self.c, dtype=complex)
        d = np.asarray(self.d, dtype=complex)
        for name, val in (("gamma", gamma), ("sigma", sigma), ("rho", rho),
                          ("c", c), ("d", d)):
            object.__setattr__(self, name, val)
        length = gamma.size
        if length < 2:
            raise ValueError("need at least 2 stages")
        if sigma.size != length or rho.size != length - 1:
            raise ValueError(
                f"stage vectors inconsistent: gamma[{gamma.size}], sigma[{sigma.size}], "
                f"rho[{rho.size}] (want L, L, L-1)")
        if np.any(gamma <= 0) or np.any(sigma <= 0) or np.any(rho <= 0):
            raise ValueError("all stage scalars must be positive")
        for name, v in (("c", c), ("d", d)):
            if abs(v[0] - 1.0) > 1e-9:
                raise ValueError(f"{name}[0] must equal 1")

    @property
    def num_stages(self):
        return int(self.gamma.size)

    @classmethod
    def from_noise_std(cls, noise_std, c, d, num_stages=6):
        """All stage scalars set to one noise standard deviation."""
        return cls(gamma=np.full(num_stages, float(noise_std)),
                   sigma=np.full(num_stages, float(noise_std)),
                   rho=np.full(num_stages - 1, float(noise_std)),
                   c=np.asarray(c, dtype=complex), d=np.asarray(d, dtype=complex))


@dataclass(frozen=True)
class WienerOperatorSet:
    w_interp: np.ndarray        # (F, F/2)
    w_freq: tuple               # L-1 matrices (F, F)
    w_time: tuple               # L-1 matrices (S, S)


def _shrinkage(r, noise_var):
    lam, u = psd_eigh(r)
    return (u * shrinkage_weights(lam, noise_var)) @ u.conj().T


def build_operators(params: BackboneParams) -> WienerOperatorSet:
    """Materialize the interpolation, frequency, and time filter matrices."""
    r_f = correlation_matrix(params.c)
    r_s = correlation_matrix(params.d)

    b = r_f[::2, ::2]
    lam, u = psd_eigh(b)
    winv = inverse_weights(lam, params.gamma[0] ** 2)
    w_interp = r_f[:, ::2] @ ((u * winv) @ u.conj().T)

    w_freq = tuple(_shrinkage(r_f, g**2) for g in params.gamma[1:])
    w_time = tuple(_shrinkage(r_s, p**2) for p in params.rho)
    return WienerOperatorSet(w_interp=w_interp, w_freq=w_freq, w_time=w_time)


def soft_decision(x, slope=SOFT_SLOPE):
    """Differentiable projection (tanh(slope Re) + j tanh(slope Im)) / sqrt(2)."""
    x = np.asarray(x)
    return (np.tanh(slope * x.real) + 1j * np.tanh(slope * x.imag)) * _HALF_SQRT2


def backbone_forward(y, pilots: PilotPattern, x_pilot, params: BackboneParams,
                     slope=SOFT_SLOPE, operators: WienerOperatorSet | None = None,
                     stage_hook=None):
    """Run the unrolled receiver; returns (x_soft, h_est).

    ``operators`` may carry a prebuilt :func:`build_operators` result so a
    sweep over many slots pays the matrix construction once.  ``stage_hook``
    (stage_index, x_tilde) is invoked after every intermediate detection,
    for diagnostics such as soft-decision saturation audits.
    """
    y = np.asarray(y)
    ops = build_operators(params) if operators is None else operators

    h_ls = ls_pilot_estimate(y, pilots, x_pilot)
    h_col = ops.w_interp @ h_ls
    h_est = extrapolate_first_symbol(h_col, y.shape[1])

    for i in range(params.num_stages - 1):
        x_tilde = mmse_detect(h_est, y, params.sigma[i] ** 2)
        if stage_hook is not None:
            stage_hook(i, x_tilde)
        x_hat = soft_decision(x_tilde, slope)
        # soft symbols are never exactly on the constellation; guard the LS
        # division against the (measure-zero) vanishing-magnitude case
        mag = np.abs(x_hat)
        x_hat = np.where(mag < 1e-12, 1e-12, x_hat)
        h_ls_full = y / x_hat[:, :, None]
        h_half = np.einsum("fg,gsn->fsn", ops.w_freq[i], h_ls_full)
        h_est = np.einsum("fsn,st->ftn", h_half, ops.w_time[i])

    x_soft = mmse_detect(h_est, y, params.sigma[-1] ** 2)
    return x_soft, h_est


def save_params(params: BackboneParams, path):
    """Write a parameter file (decimal text, 17 significant digits)."""
    lines = [
        f"version {PARAMS_FORMAT_VERSION}",
        f"F {params.c.size}",
        f"S {params.d.size}",
        f"L {params.num_stages}",
        _fmt("gamma", params.gamma),
        _fmt("sigma", params.sigma),
        _fmt("rho", params.rho),
        _fmt("c_re", params.c.real),
        _fmt("c_im", params.c.imag),
        _fmt("d_re", params.d.real),
        _fmt("d_im", params.d.imag),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(name, values):
    return name + " " + " ".join(f"{v:.17g}" for v in np.asarray(values, dtype=float))


def load_params(path) -> BackboneParams:
    """Parse a parameter file written by :func:`save_params`."""
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            name, _, rest = line.partition(" ")
            if not rest:
                raise ParamsFormatError(f"{path}:{lineno}: field {name!r} has no values")
            try:
                fields[name] = np.array([float(tok) for tok in rest.split()])
            except ValueError as exc:
                raise ParamsFormatError(f"{path}:{lineno}: field {name!r}: {exc}") from None

    for key in ("version", "F", "S", "L", "gamma", "sigma", "rho",
                "c_re", "c_im", "d_re", "d_im"):
        if key not in fields:
            raise ParamsFormatError(f"{path}: missing field {key!r}")
    version = int(fields["version"][0])
    if version != PARAMS_FORMAT_VERSION:
        raise ParamsFormatError(f"{path}: unsupported version {version}")
    f_dim, s_dim, l_dim = (int(fields[k][0]) for k in ("F", "S", "L"))
    expected = {"gamma": l_dim, "sigma": l_dim, "rho": l_dim - 1,
                "c_re": f_dim, "c_im": f_dim, "d_re": s_dim, "d_im": s_dim}
    for key, want in expected.items():
        if fields[key].size != want:
            raise ParamsFormatError(
                f"{path}: field {key!r} has {fields[key].size} values, expected {want}")
    try:
        return BackboneParams(gamma=fields["gamma"], sigma=fields["sigma"], rho=fields["rho"],
                              c=fields["c_re"] + 1j * fields["c_im"],
                              d=fields["d_re"] + 1j * fields["d_im"])
    except ValueError as exc:
        raise ParamsFormatError(f"{path}: {exc}") from None
