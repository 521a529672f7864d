import csv
import io
import subprocess
import sys

import pytest

from relayqos import cli, verify
from relayqos.channel import generate_channel, write_channel_file


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_smoke(capsys):
    code, out, _ = run(["solve", "--seed", "7", "--mode", "linear",
                        "--eta", "0.5,0.5,0.5", "--rho", "1"], capsys)
    assert code == 0
    for label in ("lambda*", "stream power", "total power", "lower bound", "relative gap"):
        assert label in out


def test_solve_dfe_from_file(tmp_path, capsys):
    p = tmp_path / "ch.txt"
    write_channel_file(p, generate_channel(3, 3, 1.0, seed=2))
    code, out, _ = run(["solve", "--channel-file", str(p), "--mode", "dfe",
                        "--eta", "0.1,0.2"], capsys)
    assert code == 0 and "mode           dfe" in out


@pytest.mark.parametrize("argv", [
    [],
    ["solve", "--eta", "0.5"],
    ["solve", "--seed", "1", "--eta", "a,b"],
    ["solve", "--seed", "1", "--eta", "0.6,0.5"],
    ["solve", "--seed", "1", "--eta", "1.5"],
    ["solve", "--seed", "1", "--eta", "0.5", "--rho", "-1"],
    ["solve", "--seed", "1", "--eta", "0.5,0.5", "--n-antennas", "1"],
    ["solve", "--channel-file", "/nonexistent/file", "--eta", "0.5"],
    ["sweep"],
    ["sweep", "--preset", "nope"],
    ["sweep", "--k-streams", "2"],
    ["verify", "--instances", "0"],
])
def test_argument_errors_exit_one(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert err.strip()


def test_sweep_csv_layout(capsys):
    code, out, _ = run(["sweep", "--preset", "table1", "--trials", "2"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["method"] for r in rows] == ["L-HA"] * 5 + ["L-LB"] * 5 + ["NL-EA"] * 5 + ["NL-LB"] * 5
    assert [r["eta"] for r in rows[:5]] == ["0.9", "0.5", "0.1", "0.05", "0.01"]


def test_sweep_flags_and_file(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, err = run(["sweep", "--n-antennas", "2", "--k-streams", "2", "--rho", "1",
                        "--eta", "0.3", "--trials", "3", "--methods", "L-HA,ALT",
                        "--out", str(out)], capsys)
    assert code == 0 and "wrote 2 rows" in err
    first = out.read_text()
    run(["sweep", "--n-antennas", "2", "--k-streams", "2", "--rho", "1", "--eta", "0.3",
         "--trials", "3", "--methods", "L-HA,ALT", "--out", str(out)], capsys)
    assert out.read_text() == first


def test_sweep_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("preset = fig5\ntrials = 2\neta = 0.4\n")
    code, out, _ = run(["sweep", "--config", str(cfg), "--methods", "NL-EA"], capsys)
    assert code == 0
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert row["eta"] == "0.1;0.2;0.2;0.4"


def test_verify_passes(capsys):
    code, out, _ = run(["verify", "--instances", "50"], capsys)
    assert code == 0
    assert out.count("[PASS]") == 6


def test_verify_failure_exit_two(monkeypatch, capsys):
    monkeypatch.setattr(verify, "check_constants",
                        lambda: verify.CheckResult("constants", False, "forced"))
    code, out, _ = run(["verify", "--instances", "10"], capsys)
    assert code == 2 and "[FAIL] constants" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "relayqos", "solve", "--seed", "1",
                           "--eta", "0.4"], capture_output=True, text=True)
    assert proc.returncode == 0 and "total power" in proc.stdout
