import json
import subprocess
import sys

import pytest

from qnnres.cli import main
from qnnres.scenario import PRESET_NAMES, preset, serialize_scenario
from test_scenario import MINIMAL


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    assert capsys.readouterr().out.split() == list(PRESET_NAMES)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qnnres", "list-presets"], capture_output=True, text=True)
    assert proc.returncode == 0 and len(proc.stdout.split()) == 9


def test_preset_fig3b_writes_csv_and_summary(tmp_path):
    out = tmp_path / "o"
    assert main(["preset", "--name", "fig3b", "--out", str(out)]) == 0
    assert (out / "fig3b.csv").exists()
    summary = json.loads((out / "fig3b_summary.json").read_text())
    assert summary["scenario"] == "fig3b"
    assert (out / "fig3b.qnn").read_text() == serialize_scenario(preset("fig3b"))


def test_run_missing_scenario_is_io_error(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "missing.qnn"), "--out", str(tmp_path)]) == 3
    assert "missing.qnn" in capsys.readouterr().err


def test_run_with_svg(tmp_path):
    path = tmp_path / "s.qnn"
    path.write_bytes(MINIMAL)
    assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "o"), "--emit", "csv,svg"]) == 0
    assert len(list((tmp_path / "o").glob("*.svg"))) == 3


def test_validate(tmp_path, capsys):
    good, bad = tmp_path / "good.qnn", tmp_path / "bad.qnn"
    good.write_bytes(MINIMAL)
    bad.write_bytes(MINIMAL.replace(b"j_su = 0.05", b"j_su = lots"))
    assert main(["validate", "--scenario", str(good)]) == 0
    assert main(["validate", "--scenario", str(bad)]) == 1
    assert "reservoir.0.j_su" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["fly"],
        ["run", "--scenario", "x.qnn"],
        ["preset", "--name", "nope", "--out", "o"],
        ["run", "--scenario", "x.qnn", "--out", "o", "--emit", "png"],
        ["sweep", "--preset", "fig2e", "--param", "reservoir.1.ratio", "--values", "", "--out", "o"],
        ["sweep", "--preset", "fig2e", "--param", "nowhere", "--values", "1", "--out", "o"],
    ],
)
def test_invalid_usage_exits_1(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_sweep_all_failures_exit_2(tmp_path, capsys):
    path = tmp_path / "s.qnn"
    path.write_bytes(MINIMAL)
    argv = ["sweep", "--scenario", str(path), "--param", "topology.couplings.0", "--values", "2,3", "--out", str(tmp_path)]
    assert main(argv) == 2
    assert "engine error" in capsys.readouterr().err


def test_sweep_writes_aggregate(tmp_path):
    path = tmp_path / "s.qnn"
    path.write_bytes(MINIMAL)
    argv = ["sweep", "--scenario", str(path), "--param", "reservoir.0.j_su", "--values", "0.03,0.05", "--out", str(tmp_path / "o")]
    assert main(argv) == 0
    lines = (tmp_path / "o" / "scenario_sweep_reservoir.0.j_su.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("0.03,")
