"""Command line interface tests (driven through main())."""

import numpy as np
import pytest

from jcesd.cli import main
from jcesd.datasets import read_dataset


def _generate(tmp_path, name="data.bin", num=20, snr=10.0, doppler=90.0, seed=11):
    path = tmp_path / name
    rc = main(["generate", "--out", str(path), "--num-slots", str(num),
               "--snr", str(snr), "--doppler", str(doppler), "--seed", str(seed)])
    assert rc == 0
    return path


def test_generate_writes_readable_dataset(tmp_path):
    path = _generate(tmp_path)
    meta, slots = read_dataset(path)
    assert meta.num_slots == 20
    assert len(slots) == 20
    assert meta.snr_db == 10.0


def test_run_with_config_document(tmp_path):
    config = tmp_path / "sweep.cfg"
    out = tmp_path / "report.csv"
    config.write_text(
        "# small smoke sweep\n"
        "doppler_list = 90\n"
        "snr_list = 0, 10\n"
        "num_slots = 20\n"
        "methods = noniterative, iterative\n"
        "master_seed = 7\n"
    )
    rc = main(["run", "--config", str(config), "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("method,channel,doppler_hz")
    assert len(lines) == 1 + 4


def test_run_flag_overrides_config(tmp_path):
    config = tmp_path / "sweep.cfg"
    out = tmp_path / "report.csv"
    config.write_text("snr_list = 0, 10\nnum_slots = 20\nmethods = noniterative\n")
    rc = main(["run", "--config", str(config), "--out", str(out),
               "--snr-list", "5"])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 2  # header + one row


def test_env_overrides_config_but_not_flag(tmp_path, monkeypatch):
    config = tmp_path / "sweep.cfg"
    config.write_text("snr_list = 0, 10, 20\nnum_slots = 20\nmethods = noniterative\n")
    out1 = tmp_path / "a.csv"
    monkeypatch.setenv("JCESD_SNR_LIST", "5")
    rc = main(["run", "--config", str(config), "--out", str(out1)])
    assert rc == 0
    assert len(out1.read_text().splitlines()) == 2  # env beat the config list

    out2 = tmp_path / "b.csv"
    rc = main(["run", "--config", str(config), "--out", str(out2),
               "--snr-list", "0,10"])
    assert rc == 0
    assert len(out2.read_text().splitlines()) == 3  # flag beat the env var


def test_run_on_dataset(tmp_path):
    data = _generate(tmp_path, num=20)
    out = tmp_path / "report.csv"
    rc = main(["run", "--dataset", str(data), "--methods", "noniterative,iterative",
               "--out", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 3


def test_run_repeat_is_byte_identical(tmp_path):
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    args = ["run", "--snr-list", "0,10", "--num-slots", "20",
            "--methods", "noniterative", "--master-seed", "3"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_run_partial_failure_exit_code(tmp_path):
    out = tmp_path / "report.csv"
    rc = main(["run", "--snr-list", "10", "--num-slots", "20",
               "--methods", "noniterative,backbone",
               "--params-file", str(tmp_path / "missing.params"),
               "--out", str(out)])
    assert rc == 2
    assert len(out.read_text().splitlines()) == 2  # surviving row still written


def test_perturb_cfo_preserves_modulus(tmp_path):
    data = _generate(tmp_path, num=8)
    out = tmp_path / "shifted.bin"
    rc = main(["perturb", "--in", str(data), "--out", str(out), "--cfo", "300"])
    assert rc == 0
    _, orig = read_dataset(data)
    meta, shifted = read_dataset(out)
    assert "cfo300" in meta.channel_tag
    for a, b in zip(orig, shifted):
        assert np.allclose(np.abs(a.y), np.abs(b.y), atol=1e-6)
        assert not np.array_equal(a.y, b.y)
        assert np.array_equal(a.x, b.x)


def test_perturb_asym_raises_noise_floor(tmp_path):
    data = _generate(tmp_path, num=8, snr=30.0)
    out = tmp_path / "noisy.bin"
    rc = main(["perturb", "--in", str(data), "--out", str(out), "--asym", "1,0.1"])
    assert rc == 0
    _, orig = read_dataset(data)
    _, noisy = read_dataset(out)
    delta = np.concatenate([(b.y - a.y).ravel() for a, b in zip(orig, noisy)])
    f = orig[0].y.shape[0]
    low = np.concatenate([(b.y - a.y)[: f // 2].ravel() for a, b in zip(orig, noisy)])
    up = np.concatenate([(b.y - a.y)[f // 2:].ravel() for a, b in zip(orig, noisy)])
    assert np.mean(np.abs(low) ** 2) == pytest.approx(2.0, rel=0.2)
    assert np.mean(np.abs(up) ** 2) == pytest.approx(0.2, rel=0.2)


def test_perturb_requires_exactly_one_kind(tmp_path):
    data = _generate(tmp_path, num=6)
    with pytest.raises(SystemExit):
        main(["perturb", "--in", str(data), "--out", str(tmp_path / "x.bin")])
    with pytest.raises(SystemExit):
        main(["perturb", "--in", str(data), "--out", str(tmp_path / "x.bin"),
              "--cfo", "10", "--asym", "1,1"])


def test_report_merge_and_convert(tmp_path):
    from jcesd.bench import load_report

    out = tmp_path / "r.csv"
    assert main(["run", "--snr-list", "10", "--num-slots", "20",
                 "--methods", "noniterative", "--out", str(out)]) == 0
    merged = tmp_path / "merged.json"
    assert main(["report", str(out), str(out), "--out", str(merged),
                 "--format", "json"]) == 0
    rows = load_report(merged)
    assert len(rows) == 2
    assert rows[0] == rows[1]


def test_flops_output(capsys):
    assert main(["flops"]) == 0
    text = capsys.readouterr().out
    assert "340992" in text
    assert "3390912" in text
    assert "9.94" in text
    assert "calibration" in text
