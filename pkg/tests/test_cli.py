import subprocess
import sys

import pytest

from microdispatch import fixture_path
from microdispatch.cli import build_parser, main

LV = str(fixture_path("lv_microgrid.json"))
FAST = ["--scenarios", "30", "--reduce-to", "5", "--iters", "5", "--population", "8", "--oos", "30"]


def test_validate_two_bus(capsys):
    assert main(["validate", "--case", str(fixture_path("two_bus.json"))]) == 0
    assert capsys.readouterr().out.strip() == "2 buses, 1 branch, radial: ok"


def test_validate_missing_file(tmp_path, capsys):
    assert main(["validate", "--case", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_validate_invalid_case(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"buses": [{"id": 0}, {"id": 0}], "branches": [], "prices": {"grid_energy_price": []}, '
                 '"profiles": {}}')
    assert main(["validate", "--case", str(p)]) == 1


def test_usage_errors(capsys):
    assert main(["validate"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["scenarios", "--case", LV, "--out", "x", "--bogus"]) == 1
    assert main(["scenarios", "--case", LV, "--out", "x", "--n", "0"]) == 1
    assert "usage" in capsys.readouterr().err


def test_help_lists_flags(capsys):
    for cmd in ("validate", "scenarios", "reduce", "dispatch", "report", "compare"):
        assert main([cmd, "--help"]) == 0
        out = capsys.readouterr().out
        assert "--" in out
    assert main(["dispatch", "--help"]) == 0
    out = capsys.readouterr().out
    for flag in ("--seed", "--scenarios", "--reduce-to", "--iters", "--weights", "--deterministic", "--threads"):
        assert flag in out
    assert "default 1000" in out


def test_scenarios_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["scenarios", "--case", LV, "--n", "50", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "scenarios_full.csv").read_bytes()
    assert a == (tmp_path / "b" / "scenarios_full.csv").read_bytes()
    assert a.startswith(b"scenario_id,probability,hour,load_mult,wind_ms,irradiance_wm2,price_mult\n")
    assert b"\r" not in a


def test_reduce(tmp_path, capsys):
    src = tmp_path / "full.csv"
    assert main(["scenarios", "--case", LV, "--n", "40", "--seed", "1", "--out", str(src)]) == 0
    assert main(["reduce", "--in", str(src), "--to", "6", "--out", str(tmp_path / "red.csv")]) == 0
    assert "40 -> 6" in capsys.readouterr().out
    rows = (tmp_path / "red.csv").read_text().splitlines()
    assert len(rows) == 1 + 6 * 24
    assert main(["reduce", "--in", str(src), "--to", "41", "--out", str(tmp_path / "r2.csv")]) == 1


def test_dispatch_both_modes_then_report(tmp_path, capsys):
    det, sto = tmp_path / "det", tmp_path / "sto"
    assert main(["dispatch", "--case", LV, "--seed", "2", *FAST, "--deterministic", "--out", str(det)]) == 0
    assert main(["dispatch", "--case", LV, "--seed", "2", *FAST, "--weights", "1", "1",
                 "--trace", str(tmp_path / "trace.csv"), "--out", str(sto)]) == 0
    for d in (det, sto):
        assert (d / "report.json").is_file() and (d / "comparison.csv").is_file()
    assert (tmp_path / "trace.csv").read_text().startswith("iteration,")
    capsys.readouterr()
    assert main(["report", "--in", str(sto)]) == 0
    out = capsys.readouterr().out
    assert "out-of-sample" in out and "stochastic" in out
    assert main(["report", "--in", str(tmp_path / "empty")]) == 1


def test_compare_command(tmp_path, capsys):
    assert main(["compare", "--case", LV, *FAST, "--seeds", "1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "mean out-of-sample Z (stochastic)" in out
    assert (tmp_path / "comparison_summary.csv").is_file()
    assert main(["compare", "--case", LV, *FAST, "--seeds", "a,b", "--out", str(tmp_path)]) == 1


def test_threads_env_fallback(monkeypatch):
    from microdispatch.cli import _threads

    monkeypatch.setenv("MICRODISPATCH_THREADS", "3")
    assert _threads(None) == 3
    assert _threads(2) == 2
    monkeypatch.setenv("MICRODISPATCH_THREADS", "zero")
    assert main(["dispatch", "--case", LV, *FAST, "--out", "unused"]) == 1


def test_runtime_error_exit_code(monkeypatch, tmp_path):
    import microdispatch.cli as cli

    def boom(cfg):
        raise RuntimeError("solver blew up")

    monkeypatch.setattr(cli, "run_study", boom)
    assert main(["dispatch", "--case", LV, *FAST, "--out", str(tmp_path)]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "microdispatch", "validate", "--case",
                           str(fixture_path("ieee69.json"))], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "69 buses, 68 branches, radial: ok"


def test_parser_builds():
    assert build_parser().prog == "microdispatch"


@pytest.mark.parametrize("argv", [["--version"]])
def test_version(argv, capsys):
    assert main(argv) == 0
