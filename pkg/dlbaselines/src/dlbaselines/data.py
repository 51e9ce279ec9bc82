"""Slot dataset consumption: file parsing, splits, and network inputs.

This package talks to the simulator only through its published file
formats.  The dataset layout (independently implemented here, see the
simulator README for the contract):

* 21-byte ASCII prologue: magic ``SLOTSET1``, manifest byte length in 12
  right-justified digits, newline;
* UTF-8 manifest of ``key: value`` lines plus
  ``array: <name> <dtype> <dims> <absolute-offset>`` records;
* raw little-endian arrays, C order, slot-major; complex values are
  interleaved float32 pairs.

Pilots occupy the even subcarriers of OFDM symbol 0.  The network input
stacks [Re Y (Nr) | Re X_p | Re H_ls (Nr) | Im Y (Nr) | Im X_p | Im H_ls
(Nr)] along the channel axis, with the LS pilot estimate zero-filled away
from the pilot cells.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass

import numpy as np

MAGIC = b"SLOTSET1"
PROLOGUE_LEN = len(MAGIC) + 12 + 1
_DTYPES = {"c8": np.dtype("<c8"), "f4": np.dtype("<f4"), "i8": np.dtype("<i8")}


class SlotFileError(ValueError):
    """The slot dataset file failed to parse."""


@dataclass(frozen=True)
class SlotDataset:
    F: int
    S: int
    Nr: int
    num_slots: int
    channel_tag: str
    doppler_hz: float
    snr_db: float
    master_seed: int
    x: np.ndarray        # (N, F, S) complex64
    bits: np.ndarray     # (N, F, S, 2) float32
    h: np.ndarray        # (N, F, S, Nr) complex64
    y: np.ndarray        # (N, F, S, Nr) complex64
    sigma2: np.ndarray   # (N,) float32

    @property
    def pilot_indices(self):
        return np.arange(0, self.F, 2)


def load_slots(path) -> SlotDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise SlotFileError(f"{path}: bad magic {blob[:8]!r}")
    try:
        header_len = int(blob[len(MAGIC):PROLOGUE_LEN - 1].decode("ascii"))
    except ValueError as exc:
        raise SlotFileError(f"{path}: malformed length prefix") from exc
    header = blob[PROLOGUE_LEN:PROLOGUE_LEN + header_len].decode("utf-8")
    if len(header.encode("utf-8")) != header_len:
        raise SlotFileError(f"{path}: truncated manifest")

    scalars = {}
    arrays = {}
    for line in header.splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        key, rest = key.strip(), rest.strip()
        if key == "array":
            name, dtype, dims, offset = rest.split()
            shape = tuple(int(v) for v in dims.split(","))
            dt = _DTYPES[dtype]
            count = int(np.prod(shape))
            start = int(offset)
            end = start + count * dt.itemsize
            if end > len(blob):
                raise SlotFileError(f"{path}: array {name!r} truncated")
            arrays[name] = np.frombuffer(blob[start:end], dtype=dt).reshape(shape)
        else:
            scalars[key] = rest

    try:
        return SlotDataset(
            F=int(scalars["F"]), S=int(scalars["S"]), Nr=int(scalars["Nr"]),
            num_slots=int(scalars["num_slots"]),
            channel_tag=scalars["channel_tag"],
            doppler_hz=float(ast.literal_eval(scalars["doppler_hz"])),
            snr_db=float(ast.literal_eval(scalars["snr_db"])),
            master_seed=int(scalars["master_seed"]),
            x=arrays["x"], bits=arrays["bits"], h=arrays["h"], y=arrays["y"],
            sigma2=arrays["sigma2"],
        )
    except KeyError as exc:
        raise SlotFileError(f"{path}: missing manifest field {exc}") from None


def split_indices(num_slots, master_seed):
    """Deterministic 60/20/20 split shared with the simulator."""
    perm = np.random.default_rng(int(master_seed)).permutation(num_slots)
    n_train = (6 * num_slots) // 10
    n_val = (2 * num_slots) // 10
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def pilot_values(ds: SlotDataset, slot_idx):
    """Known pilot symbols of one slot, snapped to exact constellation points."""
    raw = ds.x[slot_idx][ds.pilot_indices, 0]
    return (np.sign(raw.real) + 1j * np.sign(raw.imag)) / np.sqrt(2.0)


def ls_pilot_estimate(y, pilot_idx, x_pilot):
    """H_ls = Y / X at the pilot cells (unit-modulus conjugate multiply)."""
    return y[pilot_idx, 0, :] * np.conj(x_pilot)[:, None]


def network_input(y, x_pilot, pilot_idx):
    """Stacked real input (F, S, 4 Nr + 2) from one received slot."""
    f, s, nr = y.shape
    x_grid = np.zeros((f, s), dtype=y.dtype)
    x_grid[pilot_idx, 0] = x_pilot
    h_embed = np.zeros_like(y)
    h_embed[pilot_idx, 0, :] = ls_pilot_estimate(y, pilot_idx, x_pilot)
    z_c = np.concatenate([y, x_grid[:, :, None], h_embed], axis=2)
    return np.concatenate([z_c.real, z_c.imag], axis=2).astype(np.float32)


def data_mask(f, s):
    """True at payload cells; pilot cells (even f, symbol 0) excluded."""
    mask = np.ones((f, s), dtype=bool)
    mask[0::2, 0] = False
    return mask


def build_tensors(ds: SlotDataset, indices):
    """(z, bits, y, x_pilot) numpy stacks for the given slot indices."""
    zs, bits, ys, xps = [], [], [], []
    for i in indices:
        y = ds.y[i].astype(np.complex64)
        xp = pilot_values(ds, i).astype(np.complex64)
        zs.append(network_input(y, xp, ds.pilot_indices))
        bits.append(ds.bits[i].astype(np.float32))
        ys.append(y)
        xps.append(xp)
    return (np.stack(zs), np.stack(bits), np.stack(ys), np.stack(xps))
