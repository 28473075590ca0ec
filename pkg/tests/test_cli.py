import subprocess
import sys

import numpy as np
import pytest

from rfsolve.cli import main
from rfsolve.tensorio import read_csv, read_tensor, write_tensor


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path), "--plot", "false"])


def test_converge_slope(tmp_path, capsys):
    code = run(tmp_path, "converge", "--field", "linear-state", "--a", "1.0", "--order", "2",
               "--steps", "10,20,40,80,160")
    assert code == 0
    meta, rows = read_csv(tmp_path / "converge-linear-state-2-10+20+40+80+160.csv")
    assert 1.8 <= float(meta["slope"]) <= 2.3
    assert "slope=" in capsys.readouterr().out


def test_converge_exact_field(tmp_path):
    assert run(tmp_path, "converge", "--field", "linear-time", "--steps", "10,20,40,80") == 0
    meta, _ = read_csv(tmp_path / "converge-linear-time-2-10+20+40+80.csv")
    assert meta["slope"] == "exact"


def test_roundtrip_constant(tmp_path, capsys):
    assert run(tmp_path, "roundtrip", "--field", "constant") == 0
    meta, rows = read_csv(tmp_path / "roundtrip-constant-2-25.csv")
    assert rows[0][0] == "mse" and rows[0][1][0] < 1e-28
    assert (tmp_path / "roundtrip-constant-2-25.rft").exists()
    assert capsys.readouterr().out.startswith("mse=")


def test_missing_field_flag(tmp_path, capsys):
    assert run(tmp_path, "sample") == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and "--field" in err


def test_missing_command(tmp_path, capsys):
    assert run(tmp_path) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_flag_and_bad_value(tmp_path, capsys):
    assert run(tmp_path, "sample", "--field", "constant", "--bogus", "1") == 2
    assert run(tmp_path, "sample", "--field", "constant", "--order", "two") == 2
    assert run(tmp_path, "sample", "--field", "constant", "--order", "5") == 2
    assert run(tmp_path, "sample", "--field", "nope") == 2
    errs = capsys.readouterr().err.splitlines()
    assert len(errs) == 4 and all(e.startswith("error:") for e in errs)


def test_unknown_config_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nfield = constant\n\nordr = 2\n", encoding="utf-8")
    assert run(tmp_path, "sample", "--config", str(cfg)) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and ":4:" in err and "ordr" in err


def test_config_equals_flags(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    cfg = tmp_path / "run.cfg"
    cfg.write_text("command = fig2\nfield = gaussian-ot\nsteps = 12  # coarse\norder = 3\nseed = 4\n",
                   encoding="utf-8")
    assert main(["--config", str(cfg), "--out", str(a), "--plot", "false"]) == 0
    assert run(b, "fig2", "--field", "gaussian-ot", "--steps", "12", "--order", "3", "--seed", "4") == 0
    assert (a / "fig2-gaussian-ot-1+2-12.csv").read_bytes() == (b / "fig2-gaussian-ot-1+2-12.csv").read_bytes()
    # flags override the file
    assert main(["--config", str(cfg), "--steps", "6", "--out", str(c), "--plot", "false"]) == 0
    assert (c / "fig2-gaussian-ot-1+2-6.csv").exists()


def test_rfsolve_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RFSOLVE_OUT", str(tmp_path / "env"))
    assert main(["sample", "--field", "linear-state", "--steps", "5", "--plot", "false"]) == 0
    assert (tmp_path / "env" / "sample-linear-state-2-5.csv").exists()


def test_help_lists_commands(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for cmd in ("sample", "invert", "roundtrip", "train", "fig2", "converge", "nfe-ablation", "edit-study"):
        assert cmd in out


def test_numerical_failure_exit_code(tmp_path, capsys):
    assert run(tmp_path, "sample", "--field", "linear-state", "--a", "1e300", "--steps", "4") == 1
    assert capsys.readouterr().err.startswith("error:")


def test_invert_reads_input_tensor(tmp_path):
    src = tmp_path / "z.rft"
    write_tensor(np.array([0.5, -0.5]), src)
    assert run(tmp_path, "invert", "--field", "rotation", "--input", str(src), "--steps", "8") == 0
    out = read_tensor(tmp_path / "invert-rotation-2-8.rft")
    assert out.shape == (2,)
    assert np.linalg.norm(out) == pytest.approx(np.sqrt(0.5), rel=1e-3)


def test_missing_input_file(tmp_path):
    assert run(tmp_path, "invert", "--field", "constant", "--input", str(tmp_path / "missing.rft")) == 2


def test_train_then_sample_with_params(tmp_path):
    assert run(tmp_path, "train", "--train-steps", "20", "--hidden", "8,8") == 0
    params = tmp_path / "train-mlp-gaussian-mixture-20-params"
    assert (params / "manifest.json").exists()
    assert run(tmp_path, "sample", "--field", "mlp", "--params", str(params), "--samples", "5", "--steps", "4") == 0
    _, rows = read_csv(tmp_path / "sample-mlp-2-4.csv")
    assert len(rows) == 5


def test_plots_written(tmp_path):
    assert main(["nfe-ablation", "--field", "linear-state", "--total-nfe", "12", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "nfe-ablation-linear-state-1+2+3-12.png").read_bytes()[:4] == b"\x89PNG"


def test_console_script_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rfsolve.cli", "roundtrip", "--field", "constant",
                           "--out", str(tmp_path), "--plot", "false"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("mse=")
