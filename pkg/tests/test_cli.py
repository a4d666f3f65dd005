import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from csdoa.harness.cli import cli_main


def test_example1_outputs(tmp_path, capsys):
    assert cli_main(["example1", "--seed", "42", "--trials", "4", "--out", str(tmp_path)]) == 0
    for name in ("example1_estimates.csv", "example1_roots.csv", "example1_summary.csv",
                 "example1_roots.svg", "example1_config.ini", "example1_timing.json"):
        assert (tmp_path / name).exists(), name
    lines = (tmp_path / "example1_estimates.csv").read_text().splitlines()
    assert lines[0] == "# csdoa-csv v1" and len(lines) == 2 + 4
    ET.parse(tmp_path / "example1_roots.svg")
    assert "rmse" in capsys.readouterr().out


def test_svgs_are_valid_xml(tmp_path):
    assert cli_main(["rmse-sweep", "--trials", "2", "--out", str(tmp_path)]) == 0
    assert cli_main(["deviation-sweep", "--trials", "2", "--out", str(tmp_path)]) == 0
    for svg in tmp_path.glob("*.svg"):
        assert ET.parse(svg).getroot().tag.endswith("svg")
    assert len(list(tmp_path.glob("*.svg"))) == 3


def test_config_file_and_rerun(tmp_path):
    out = tmp_path / "a"
    assert cli_main(["example1", "--trials", "2", "--variant", "cs", "--out", str(out)]) == 0
    # the written config reproduces the run
    out2 = tmp_path / "b"
    assert cli_main(["example1", "--config", str(out / "example1_config.ini"),
                     "--out", str(out2)]) == 0
    assert (out / "example1_estimates.csv").read_bytes() == \
        (out2 / "example1_estimates.csv").read_bytes()
    assert "classic" not in (out / "example1_estimates.csv").read_text()


def test_missing_config_file(tmp_path, capsys):
    path = tmp_path / "missing.ini"
    assert cli_main(["example1", "--config", str(path), "--out", str(tmp_path)]) == 1
    assert "missing.ini" in capsys.readouterr().err


def test_unknown_flag_prints_usage(capsys):
    assert cli_main(["example1", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand():
    assert cli_main(["fig5"]) == 1
    assert cli_main([]) == 1


def test_invalid_values(tmp_path):
    assert cli_main(["example1", "--trials", "0", "--out", str(tmp_path)]) == 1
    assert cli_main(["example1", "--seed", "-1", "--out", str(tmp_path)]) == 1
    bad = tmp_path / "m.ini"
    bad.write_text("[experiment]\nm = 2\n")
    assert cli_main(["example1", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_timing_outputs(tmp_path, capsys):
    cfg = tmp_path / "t.ini"
    cfg.write_text("[experiment]\ntiming_repeats = 10\n")
    assert cli_main(["timing", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "timing.csv").read_text()
    assert "126" in text
    measured = json.loads((tmp_path / "timing_timing.json").read_text())
    assert measured["eigendecomposition_speedup"] > 0
    assert "rooting degree 126" in capsys.readouterr().out


def test_lemma_check_failure_exit_code(tmp_path):
    # 20 trials cannot reach 5 % accuracy: reported as a numerical failure
    assert cli_main(["lemma-check", "--trials", "20", "--out", str(tmp_path)]) == 2
    assert (tmp_path / "lemma_check.csv").exists()


@pytest.mark.slow
def test_lemma_check_full(tmp_path, capsys):
    assert cli_main(["lemma-check", "--trials", "100000", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "2a" in out and "2b" in out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "csdoa", "example1", "--trials", "1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
