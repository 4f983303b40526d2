import os
import subprocess
import sys

import numpy as np
import pytest

from rydfret import __version__
from rydfret.cli import main
from rydfret.config import parse_config

FAST = "shots = 4 \nseparations = 30, 50 um\ntimes = 0:10:5 us\nfields = 0.37:0.42:0.01 V/cm\n"


def write_cfg(tmp_path, text=FAST, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    rows = [ln.split(",") for ln in open(path).read().splitlines() if not ln.startswith("#")]
    return rows[0], np.array(rows[1:], dtype=float)


def test_pair_beat_period(tmp_path):
    out = tmp_path / "o"
    cfg = write_cfg(tmp_path, "times = 0:30:0.01 us\n")
    assert main(["pair", "--config", cfg, "--out", str(out)]) == 0
    head, data = read_csv(out / "pair_F1_d40um_seed0.csv")
    assert head == ["time_us", "p_fraction", "analytic"]
    assert np.allclose(data[:, 1], data[:, 2], atol=1e-12)
    t, p = data[:, 0], data[:, 1]
    first_max = t[np.argmax(p[t < 10])]
    assert 2 * first_max == pytest.approx(14.49, abs=0.02)
    report = (out / "pair_F1_d40um_seed0_report.txt").read_text()
    assert "beat_period_us = 14.48" in report


def test_tensor_pair(tmp_path):
    out = tmp_path / "o"
    cfg = write_cfg(tmp_path, "mode = tensor\ntimes = 0:10:5 us\n")
    assert main(["pair", "--config", cfg, "--out", str(out)]) == 0
    assert "basis_dim = " in (out / "pair_F1_d40um_seed0_report.txt").read_text()


@pytest.mark.parametrize(
    "cmd,files",
    [
        ("field-scan", ["field-scan_F1F2_seed0.csv", "field-scan_F1F2_seed0_fit.txt"]),
        ("position-scan", ["position-scan_F1_seed0.csv", "position-scan_F1_seed0_fit.txt"]),
        ("time-scan", ["time-scan_F1_d30um_seed0.csv", "time-scan_F1_d50um_seed0.csv", "rates_F1_seed0.csv",
                       "rates_F1_seed0.txt"]),
        ("converge", ["converge_F1_seed0.csv", "converge_F1_seed0_report.txt"]),
    ],
)
def test_subcommands_write_expected_files(tmp_path, cmd, files):
    out = tmp_path / "o"
    assert main([cmd, "--config", write_cfg(tmp_path), "--out", str(out)]) == 0
    names = set(os.listdir(out))
    stem = f"{cmd}_seed0"
    assert set(files) | {f"config_{stem}.txt", f"manifest_{stem}.json"} == names


def test_byte_identical_across_runs_and_workers(tmp_path):
    cfg = write_cfg(tmp_path, "shots = 12\nseparations = 20, 40 um\ntimes = 0:10:5 us\n")
    outs = []
    for k, w in enumerate(("1", "1", "3")):
        out = tmp_path / f"o{k}"
        assert main(["time-scan", "--config", cfg, "--out", str(out), "--workers", w]) == 0
        outs.append(out)
    for name in os.listdir(outs[0]):
        if name.startswith("manifest_"):
            continue
        blobs = {(o / name).read_bytes() for o in outs}
        assert len(blobs) == 1, name


def test_seed_override_changes_results(tmp_path):
    cfg = write_cfg(tmp_path)
    main(["position-scan", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["position-scan", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = read_csv(tmp_path / "a" / "position-scan_F1_seed1.csv")[1]
    b = read_csv(tmp_path / "b" / "position-scan_F1_seed2.csv")[1]
    assert not np.array_equal(a, b)


def test_invalid_out_dir_writes_nothing(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["pair", "--out", str(blocker)]) == 8
    assert main(["pair", "--out", str(tmp_path / "missing" / "deeper")]) == 8
    assert sorted(os.listdir(tmp_path)) == ["file"]
    assert "I/O error" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "field = 0.38\n")
    assert main(["pair", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "missing unit" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_experiment_mismatch(tmp_path):
    cfg = write_cfg(tmp_path, "experiment = field-scan\n")
    assert main(["pair", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_model_error_exit_code(tmp_path):
    # tiny basis cap forces a resource error in the tensor pair
    cfg = write_cfg(tmp_path, "mode = tensor\nbasis_cap = 2\ntimes = 0, 1 us\n")
    assert main(["pair", "--config", cfg, "--out", str(tmp_path / "o")]) == 6


def test_version_and_entry_point():
    out = subprocess.run([sys.executable, "-m", "rydfret.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
    bad = subprocess.run([sys.executable, "-m", "rydfret.cli", "nope"], capture_output=True, text=True)
    assert bad.returncode == 2


CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_shipped_configs_parse(name):
    with open(os.path.join(CONFIG_DIR, name)) as fh:
        cfg = parse_config(fh.read())
    assert cfg.experiment in name.replace("_", "-") or cfg.experiment == "converge"
