"""Slot dataset persistence, train/val/test splitting, and the stacked
real-valued input tensor consumed by neural receivers.

File layout (the interchange contract with external consumers):

* a 21-byte ASCII prologue: the 8-byte magic ``SLOTSET1``, the manifest
  byte length right-justified in 12 ASCII digits, and a newline;
* the UTF-8 manifest: ``key: value`` lines plus one
  ``array: <name> <dtype> <dim,dim,...> <absolute-byte-offset>`` line per
  array;
* raw little-endian array payloads at the stated offsets, C order,
  slot-major then (f, s, n_r); complex arrays are interleaved (re, im)
  float32 pairs (dtype code ``c8``), reals are float32 (``f4``), and the
  per-slot seeds are int64 (``i8``).
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from .channel import Slot
from .grid import PilotPattern, hard_project
from .receiver import ls_pilot_estimate

MAGIC = b"SLOTSET1"
PROLOGUE_LEN = len(MAGIC) + 12 + 1
FORMAT_VERSION = 1

_DTYPES = {"c8": np.dtype("<c8"), "f4": np.dtype("<f4"), "i8": np.dtype("<i8")}


class DatasetFormatError(ValueError):
    """A dataset file failed structural validation."""


@dataclass(frozen=True)
class ArrayRecord:
    name: str
    dtype: str
    shape: tuple
    offset: int

    @property
    def nbytes(self):
        return int(np.prod(self.shape, dtype=np.int64)) * _DTYPES[self.dtype].itemsize


@dataclass(frozen=True)
class DatasetManifest:
    format_version: int
    F: int
    S: int
    Nr: int
    num_slots: int
    channel_tag: str
    doppler_hz: float
    snr_db: float
    delay_spread_s: float
    master_seed: int
    arrays: tuple = field(default_factory=tuple)


def _array_plan(num, f, s, nr):
    """Arrays stored per dataset, in file order, with shapes."""
    return [
        ("x", "c8", (num, f, s)),
        ("bits", "f4", (num, f, s, 2)),
        ("h", "c8", (num, f, s, nr)),
        ("y", "c8", (num, f, s, nr)),
        ("sigma2", "f4", (num,)),
        ("snr_db", "f4", (num,)),
        ("doppler_hz", "f4", (num,)),
        ("seed", "i8", (num,)),
    ]


def _render_manifest(meta: DatasetManifest):
    lines = [
        f"format_version: {meta.format_version}",
        f"F: {meta.F}",
        f"S: {meta.S}",
        f"Nr: {meta.Nr}",
        f"num_slots: {meta.num_slots}",
        f"channel_tag: {meta.channel_tag}",
        f"doppler_hz: {meta.doppler_hz!r}",
        f"snr_db: {meta.snr_db!r}",
        f"delay_spread_s: {meta.delay_spread_s!r}",
        f"master_seed: {meta.master_seed}",
    ]
    for rec in meta.arrays:
        dims = ",".join(str(d) for d in rec.shape)
        lines.append(f"array: {rec.name} {rec.dtype} {dims} {rec.offset}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_dataset(slots, path, *, channel_tag="kron", doppler_hz=None, snr_db=None,
                  delay_spread_s=0.0, master_seed=0):
    """Persist a list of slots; shapes must be uniform across slots."""
    if not slots:
        raise ValueError("cannot write an empty dataset")
    f, s, nr = slots[0].h.shape
    for i, slot in enumerate(slots):
        if slot.h.shape != (f, s, nr) or slot.y.shape != (f, s, nr) or slot.x.shape != (f, s):
            raise ValueError(f"slot {i} has inconsistent shapes")

    if doppler_hz is None:
        doppler_hz = slots[0].doppler_hz
    if snr_db is None:
        snr_db = slots[0].snr_db

    payload = {
        "x": np.stack([sl.x for sl in slots]).astype("<c8"),
        "bits": np.stack([sl.bits for sl in slots]).astype("<f4"),
        "h": np.stack([sl.h for sl in slots]).astype("<c8"),
        "y": np.stack([sl.y for sl in slots]).astype("<c8"),
        "sigma2": np.array([sl.sigma2 for sl in slots], dtype="<f4"),
        "snr_db": np.array([sl.snr_db for sl in slots], dtype="<f4"),
        "doppler_hz": np.array([sl.doppler_hz for sl in slots], dtype="<f4"),
        "seed": np.array([sl.seed for sl in slots], dtype="<i8"),
    }

    plan = _array_plan(len(slots), f, s, nr)
    # two passes: manifest length depends on the offsets, which depend on the
    # manifest length; offsets are stable once the rendered length settles
    records = [ArrayRecord(name, dt, shape, 0) for name, dt, shape in plan]
    meta = DatasetManifest(FORMAT_VERSION, f, s, nr, len(slots), str(channel_tag),
                           float(doppler_hz), float(snr_db), float(delay_spread_s),
                           int(master_seed), tuple(records))
    for _ in range(4):
        header_len = len(_render_manifest(meta))
        offset = PROLOGUE_LEN + header_len
        new_records = []
        for name, dt, shape in plan:
            rec = ArrayRecord(name, dt, shape, offset)
            new_records.append(rec)
            offset += rec.nbytes
        new_meta = DatasetManifest(FORMAT_VERSION, f, s, nr, len(slots), str(channel_tag),
                                   float(doppler_hz), float(snr_db), float(delay_spread_s),
                                   int(master_seed), tuple(new_records))
        if len(_render_manifest(new_meta)) == header_len:
            meta = new_meta
            break
        meta = new_meta
    else:
        raise RuntimeError("manifest offsets failed to stabilize")

    header = _render_manifest(meta)
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC + f"{len(header):>12d}".encode("ascii") + b"\n")
            fh.write(header)
            for rec in meta.arrays:
                assert fh.tell() == rec.offset
                fh.write(np.ascontiguousarray(payload[rec.name]).tobytes())
    except OSError as exc:
        raise OSError(f"writing dataset {path}: {exc}") from exc
    return meta


def _parse_manifest(text, path):
    scalars = {}
    arrays = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        key, rest = key.strip(), rest.strip()
        if key == "array":
            parts = rest.split()
            if len(parts) != 4:
                raise DatasetFormatError(f"{path}:{lineno}: malformed array line {rest!r}")
            name, dtype, dims, offset = parts
            if dtype not in _DTYPES:
                raise DatasetFormatError(f"{path}:{lineno}: unknown dtype {dtype!r}")
            shape = tuple(int(d) for d in dims.split(","))
            arrays.append(ArrayRecord(name, dtype, shape, int(offset)))
        else:
            scalars[key] = rest
    try:
        meta = DatasetManifest(
            format_version=int(scalars["format_version"]),
            F=int(scalars["F"]), S=int(scalars["S"]), Nr=int(scalars["Nr"]),
            num_slots=int(scalars["num_slots"]),
            channel_tag=scalars["channel_tag"],
            doppler_hz=float(ast.literal_eval(scalars["doppler_hz"])),
            snr_db=float(ast.literal_eval(scalars["snr_db"])),
            delay_spread_s=float(ast.literal_eval(scalars["delay_spread_s"])),
            master_seed=int(scalars["master_seed"]),
            arrays=tuple(arrays),
        )
    except KeyError as exc:
        raise DatasetFormatError(f"{path}: manifest missing field {exc}") from None
    if meta.format_version != FORMAT_VERSION:
        raise DatasetFormatError(f"{path}: unsupported format version {meta.format_version}")
    return meta


def _validate(meta: DatasetManifest, file_size, path):
    expected = {name: shape for name, _, shape in
                _array_plan(meta.num_slots, meta.F, meta.S, meta.Nr)}
    seen = {}
    spans = []
    for rec in meta.arrays:
        if rec.name not in expected:
            raise DatasetFormatError(f"{path}: unexpected array {rec.name!r}")
        if rec.shape != expected[rec.name]:
            raise DatasetFormatError(
                f"{path}: array {rec.name!r} has shape {rec.shape}, "
                f"manifest dimensions imply {expected[rec.name]}")
        if rec.offset + rec.nbytes > file_size:
            raise DatasetFormatError(
                f"{path}: array {rec.name!r} is truncated "
                f"(needs bytes up to {rec.offset + rec.nbytes}, file has {file_size})")
        seen[rec.name] = rec
        spans.append((rec.offset, rec.offset + rec.nbytes, rec.name))
    missing = set(expected) - set(seen)
    if missing:
        raise DatasetFormatError(f"{path}: manifest lacks arrays {sorted(missing)}")
    spans.sort()
    for (_, end_a, name_a), (start_b, _, name_b) in zip(spans, spans[1:]):
        if start_b < end_a:
            raise DatasetFormatError(f"{path}: arrays {name_a!r} and {name_b!r} overlap")


def read_manifest(path) -> DatasetManifest:
    with open(path, "rb") as fh:
        prologue = fh.read(PROLOGUE_LEN)
        if len(prologue) < PROLOGUE_LEN or prologue[:len(MAGIC)] != MAGIC:
            raise DatasetFormatError(f"{path}: not a slot dataset (bad magic)")
        try:
            header_len = int(prologue[len(MAGIC):].decode("ascii"))
        except ValueError:
            raise DatasetFormatError(f"{path}: malformed length prefix") from None
        header = fh.read(header_len)
        if len(header) != header_len:
            raise DatasetFormatError(f"{path}: truncated manifest")
    return _parse_manifest(header.decode("utf-8"), path)


def read_dataset(path):
    """Load (manifest, slots); validates structure before materializing."""
    import os

    meta = read_manifest(path)
    _validate(meta, os.path.getsize(path), path)
    raw = {}
    with open(path, "rb") as fh:
        for rec in meta.arrays:
            fh.seek(rec.offset)
            buf = fh.read(rec.nbytes)
            if len(buf) != rec.nbytes:
                raise DatasetFormatError(f"{path}: array {rec.name!r} is truncated")
            raw[rec.name] = np.frombuffer(buf, dtype=_DTYPES[rec.dtype]).reshape(rec.shape)

    slots = []
    for i in range(meta.num_slots):
        slots.append(Slot(
            x=raw["x"][i].astype(complex),
            bits=raw["bits"][i].astype(np.int8),
            h=raw["h"][i].astype(complex),
            y=raw["y"][i].astype(complex),
            sigma2=float(raw["sigma2"][i]),
            snr_db=float(raw["snr_db"][i]),
            doppler_hz=float(raw["doppler_hz"][i]),
            seed=int(raw["seed"][i]),
        ))
    return meta, slots


def split_dataset(num_slots, master_seed):
    """Deterministic 60/20/20 split: (train_idx, val_idx, test_idx)."""
    if num_slots < 5:
        raise ValueError("need at least 5 slots to split 60/20/20")
    perm = np.random.default_rng(int(master_seed)).permutation(num_slots)
    n_train = (6 * num_slots) // 10
    n_val = (2 * num_slots) // 10
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def build_network_input(y, x_pilot_grid, pilots: PilotPattern):
    """Stacked real input Z of shape (F, S, 4 Nr + 2).

    Channel order: [Re Y (Nr), Re X_p, Re H~_LS (Nr), Im Y (Nr), Im X_p,
    Im H~_LS (Nr)].  The LS channel estimate occupies the pilot cells and is
    zero elsewhere; only receiver-side information enters.
    """
    y = np.asarray(y)
    x_pilot_grid = np.asarray(x_pilot_grid, dtype=complex)
    f, s, nr = y.shape
    if x_pilot_grid.shape != (f, s):
        raise ValueError(f"pilot grid shape {x_pilot_grid.shape} != {(f, s)}")

    # pilots are constellation points by protocol; snap away any float32
    # transport rounding before the unit-modulus LS division
    x_pilot = hard_project(x_pilot_grid[pilots.subcarrier_indices, pilots.symbol_index])
    h_ls = ls_pilot_estimate(y, pilots, x_pilot)
    h_embed = np.zeros_like(y)
    h_embed[pilots.subcarrier_indices, pilots.symbol_index, :] = h_ls

    z_c = np.concatenate([y, x_pilot_grid[:, :, None], h_embed], axis=2)
    return np.concatenate([z_c.real, z_c.imag], axis=2)
