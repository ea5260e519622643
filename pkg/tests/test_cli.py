import subprocess
import sys

import numpy as np
import pytest

from doublechirp.channel import read_stream
from doublechirp.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from doublechirp.harness import CSV_FIELDS, read_csv


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "sim.cfg"
    path.write_text("n_users = 2\nl_antennas = 8\ntrials = 3\nsnr_grid_db = -10, 0\n")
    return path


def test_run_writes_csv(tmp_path, config, capsys):
    out = tmp_path / "per.csv"
    assert main(["run", "--config", str(config), "--out", str(out), "--seed", "4"]) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 2 and rows[0]["trials"] == 3
    assert out.read_text().splitlines()[0] == ",".join(CSV_FIELDS)
    assert "PER 1e-3" in capsys.readouterr().out


def test_global_flags_before_command(tmp_path, config):
    out = tmp_path / "per.csv"
    assert main(["--trials", "2", "--config", str(config), "--out", str(out), "run"]) == 0
    assert read_csv(out)[0]["trials"] == 2


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("n_thr = 12\n")
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_is_io_error(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == EXIT_IO


def test_unwritable_output_is_io_error(tmp_path, config):
    out = tmp_path / "no" / "such" / "dir" / "per.csv"
    assert main(["run", "--config", str(config), "--out", str(out)]) == EXIT_IO


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--trials", "many"])
    assert exc.value.code == EXIT_CONFIG


def test_scenario_example(tmp_path, capsys):
    out = tmp_path / "z.csv"
    assert main(["scenario", "example2", "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "example2: PASS" in text
    z = np.loadtxt(out, delimiter=",", skiprows=1)
    assert z.shape[1] == 3


def test_scenario_figure(tmp_path):
    out = tmp_path / "fig"
    assert main(["scenario", "fig4", "--trials", "2", "--out", str(out)]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["fig4_assigned.csv", "fig4_same-delta.csv"]


def test_dump_stream(tmp_path, config, capsys):
    out = tmp_path / "s.bin"
    assert main(["dump-stream", "--config", str(config), "--snr", "5", "--out", str(out)]) == 0
    s = read_stream(out)
    assert s.n_antennas == 8 and s.noise_var == pytest.approx(10 ** -0.5)
    assert capsys.readouterr().out.count("ED ") == 2


def test_validate_plan(tmp_path, capsys):
    good = tmp_path / "good.plan"
    good.write_text("m = 128\n1, 0, 30\n2, 8, 24\n")
    assert main(["validate-plan", str(good)]) == EXIT_OK
    bad = tmp_path / "bad.plan"
    bad.write_text("m = 128\n1, 0, 30\n2, 8, 24\n3, 2, 32\n")
    assert main(["validate-plan", str(bad)]) == EXIT_CONFIG
    assert "duplicate delta 30 between EDs 1 and 3" in capsys.readouterr().out
    garbled = tmp_path / "garbled.plan"
    garbled.write_text("1, 0\n")
    assert main(["validate-plan", str(garbled)]) == EXIT_CONFIG


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "doublechirp.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("run", "scenario", "dump-stream", "validate-plan"):
        assert cmd in proc.stdout
