import subprocess
import sys

import numpy as np
import pytest

from ppb import io as pio
from ppb.cli import main
from ppb.simulate import EventStream

from test_scenario import SMALL

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


def write(tmp_path, text, name="s.scenario"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_analyze_success(tmp_path, capsys):
    assert main(["analyze", write(tmp_path, SMALL), "--out-dir", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "small_summary.toml" in out
    summary = tomllib.loads((tmp_path / "o" / "small_summary.toml").read_text())
    assert summary["cross"]["peak_g2"] > 5


def test_overrides_reach_the_outputs(tmp_path):
    args = ["analyze", write(tmp_path, SMALL), "--out-dir", str(tmp_path), "--window-ns", "2.0",
            "--rebin-ps", "200"]
    assert main(args) == 0
    summary = tomllib.loads((tmp_path / "small_summary.toml").read_text())
    assert summary["cross"]["coincidence_window_ns"] == 2.0
    assert summary["cross"]["bin_ps"] == 200


def test_simulate_then_convert(tmp_path):
    assert main(["simulate", write(tmp_path, SMALL), "--out-dir", str(tmp_path)]) == 0
    ev = tmp_path / "small_cross.ppes"
    assert ev.exists()
    assert main(["convert", str(ev), str(tmp_path / "c.csv")]) == 0
    assert main(["convert", str(tmp_path / "c.csv"), str(tmp_path / "back.ppes"), "--to", "binary"]) == 0
    assert (tmp_path / "back.ppes").read_bytes() == ev.read_bytes()


def test_theory_command(tmp_path, capsys):
    assert main(["theory", "--out-dir", str(tmp_path)]) == 0
    data = tomllib.loads(capsys.readouterr().out.split("\n", 1)[1])
    assert data["theory"]["doppler_width_MHz"] == pytest.approx(532.3, abs=0.1)
    assert (tmp_path / "theory_waveform.csv").read_text().startswith("tau_ps,")


def test_validation_error_exit_2(tmp_path, capsys):
    bad = write(tmp_path, SMALL.replace("duration_s = 0.5", "duration_s = -1"))
    assert main(["analyze", bad, "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "source.duration_s" in err and "line" in err


def test_bad_override_exit_2(tmp_path):
    assert main(["analyze", write(tmp_path, SMALL), "--rebin-ps", "301", "--out-dir", str(tmp_path)]) == 2


def test_unknown_figure_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["reproduce", "fig9"])
    assert info.value.code == 2


def test_missing_input_exit_3(tmp_path):
    text = SMALL.replace('topology = ["cross", "hbt-signal"]', 'topology = "cross"')
    text += f'\n[input]\nevents = "{tmp_path / "absent.ppes"}"\n'
    assert main(["analyze", write(tmp_path, text), "--out-dir", str(tmp_path)]) == 3
    assert main(["analyze", str(tmp_path / "nope.scenario")]) == 3


def test_corrupt_file_exit_3(tmp_path):
    bad = tmp_path / "bad.ppes"
    bad.write_bytes(b"PPES" + b"\x00" * 5)
    assert main(["convert", str(bad)]) == 3


def test_saturated_input_exit_4(tmp_path, capsys):
    ts = np.arange(0, 4_000_000, 40, dtype=np.int64)
    ev = tmp_path / "dense.ppes"
    pio.write_events(ev, [EventStream(ts, 4e-6, 1), EventStream(ts + 7, 4e-6, 2)])
    text = SMALL.replace('topology = ["cross", "hbt-signal"]', 'topology = "cross"')
    text += f'\n[input]\nevents = "{ev}"\n'
    assert main(["analyze", write(tmp_path, text), "--out-dir", str(tmp_path)]) == 4
    assert "saturates" in capsys.readouterr().err


def test_console_script_exit_code(tmp_path):
    bad = write(tmp_path, SMALL.replace("efficiency = 0.2", "efficiency = 2"))
    r = subprocess.run([sys.executable, "-m", "ppb.cli", "analyze", bad], capture_output=True, text=True)
    assert r.returncode == 2 and r.stderr.startswith("error:")


def test_reproduce_fig4b_end_to_end(tmp_path, capsys):
    assert main(["reproduce", "fig4b", "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "quantity,measured,measured_sigma,published,published_sigma" in out
    bench = (tmp_path / "fig4b_benchmarks.csv").read_text().splitlines()
    assert [row.split(",")[0] for row in bench[1:]] == ["g_si_0", "fwhm_ns", "R", "coincidence_net_cps"]
    assert (tmp_path / "fig4b_theory.csv").exists()
