"""Dataset parsing and input construction, cross-checked against the simulator."""

import subprocess
import sys

import numpy as np
import pytest

from dlbaselines.data import (SlotFileError, build_tensors, data_mask,
                              load_slots, network_input, pilot_values,
                              split_indices)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "slots.bin"
    proc = subprocess.run(
        [sys.executable, "-m", "jcesd.cli", "generate", "--out", str(path),
         "--num-slots", "12", "--snr", "10", "--doppler", "90", "--seed", "77"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return path


def test_load_slots_shapes(dataset):
    ds = load_slots(dataset)
    assert (ds.F, ds.S, ds.Nr, ds.num_slots) == (24, 12, 4, 12)
    assert ds.y.shape == (12, 24, 12, 4)
    assert ds.bits.shape == (12, 24, 12, 2)
    assert ds.x.dtype == np.complex64
    assert set(np.unique(ds.bits)) <= {0.0, 1.0}


def test_forward_model_consistency(dataset):
    # y ~= h * x + noise with the manifest noise level
    ds = load_slots(dataset)
    resid = ds.y - ds.h * ds.x[:, :, :, None]
    power = float(np.mean(np.abs(resid) ** 2))
    assert power == pytest.approx(10 ** (-ds.snr_db / 10), rel=0.15)


def test_bad_magic_rejected(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"WRONGMAG" + b"0" * 40)
    with pytest.raises(SlotFileError, match="magic"):
        load_slots(bad)


def test_truncated_array_rejected(dataset, tmp_path):
    blob = dataset.read_bytes()
    cut = tmp_path / "cut.bin"
    cut.write_bytes(blob[:-64])
    with pytest.raises(SlotFileError, match="truncated"):
        load_slots(cut)


def test_split_matches_simulator(dataset):
    # the 60/20/20 split must agree with the simulator's on the same seed
    from jcesd.datasets import split_dataset

    ds = load_slots(dataset)
    ours = split_indices(ds.num_slots, ds.master_seed)
    theirs = split_dataset(ds.num_slots, ds.master_seed)
    for a, b in zip(ours, theirs):
        assert np.array_equal(a, b)


def test_pilot_values_unit_modulus(dataset):
    ds = load_slots(dataset)
    for i in range(ds.num_slots):
        xp = pilot_values(ds, i)
        assert np.allclose(np.abs(xp), 1.0, atol=1e-12)


def test_network_input_matches_simulator(dataset):
    from jcesd.datasets import build_network_input
    from jcesd.grid import PilotPattern

    ds = load_slots(dataset)
    pilots = PilotPattern(ds.F)
    for i in range(3):
        y = ds.y[i].astype(complex)
        xp = pilot_values(ds, i)
        ours = network_input(y, xp, ds.pilot_indices)
        grid = np.zeros((ds.F, ds.S), dtype=complex)
        grid[ds.pilot_indices, 0] = xp
        theirs = build_network_input(y, grid, pilots)
        assert np.allclose(ours, theirs, atol=1e-6)


def test_network_input_channel_count(dataset):
    ds = load_slots(dataset)
    z = network_input(ds.y[0].astype(complex), pilot_values(ds, 0), ds.pilot_indices)
    assert z.shape == (24, 12, 18)


def test_data_mask_excludes_pilot_cells():
    mask = data_mask(24, 12)
    assert mask.shape == (24, 12)
    assert not mask[0, 0] and not mask[22, 0]
    assert mask[1, 0] and mask[0, 1]
    assert int(mask.sum()) == 24 * 12 - 12


def test_build_tensors_stacks(dataset):
    ds = load_slots(dataset)
    z, bits, y, xp = build_tensors(ds, np.array([0, 3, 5]))
    assert z.shape == (3, 24, 12, 18)
    assert bits.shape == (3, 24, 12, 2)
    assert y.shape == (3, 24, 12, 4)
    assert xp.shape == (3, 12)
    assert z.dtype == np.float32
