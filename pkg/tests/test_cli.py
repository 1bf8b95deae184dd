"""End-to-end tests for the command-line entry point."""

import json
import shutil
import subprocess
import sys

import pytest

from aggrokin import __version__
from aggrokin.cli import main
from aggrokin.reports import hash_config, hash_file

EQ_CFG = {
    "experiment": "equilibria",
    "params": {"m": 1.0, "lambda": 0.25},
    "potential": {"kind": "indicator", "half_width": 0.5, "amplitude": 1.0},
}


def write_cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_experiment_rejected_by_parser(capsys):
    with pytest.raises(SystemExit) as err:
        main(["warp-drive", "--config", "x.json"])
    assert err.value.code == 2
    assert "warp-drive" in capsys.readouterr().err


def test_equilibria_run_and_report(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path, EQ_CFG)
    out = tmp_path / "out"
    code = main(["equilibria", "--config", str(cfg_path), "--out", str(out),
                 "--seed", "5"])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "PASS low_state_balances" in stdout
    assert "PASS states_straddle_inverse_mass" in stdout
    assert stdout.strip().endswith("overall: PASS")

    report = json.loads((out / "report.json").read_text())
    assert report["experiment"] == "equilibria"
    assert report["passed"] is True
    assert report["seed"] == 5
    assert report["config_hash"] == hash_config(EQ_CFG)
    assert report["input_hashes"]["config"] == hash_file(cfg_path)
    assert report["artifacts"] == ["equilibria.json"]
    assert "equilibrium_residual" in report["tolerances"]

    eq = json.loads((out / "equilibria.json").read_text())
    assert eq["regime"] == "subcritical"
    assert 0.0 < eq["kappa1"] < 1.0 < eq["kappa2"]


def test_reruns_are_byte_identical(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path, {
        "experiment": "recurrence",
        "params": {"m": 1.0, "lambda": 16.0},
        "d0": 8.0,
        "steps": 2000,
    })
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["recurrence", "--config", str(cfg_path), "--out", str(out),
                     "--no-plots"])
        assert code == 0
        outs.append(out)
    capsys.readouterr()
    for artifact in ("report.json", "recurrence.csv", "asymptote.json"):
        assert (outs[0] / artifact).read_bytes() == (outs[1] / artifact).read_bytes()
    assert not (outs[0] / "recurrence.png").exists()


def test_mismatched_experiment_name_fails_cleanly(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path, EQ_CFG)
    code = main(["horizon", "--config", str(cfg_path), "--out",
                 str(tmp_path / "out")])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("error (ConfigurationError):")
    assert "equilibria" in err


def test_invalid_config_fails_cleanly(tmp_path, capsys):
    bad = dict(EQ_CFG)
    bad["lamda"] = 3.0
    cfg_path = write_cfg(tmp_path, bad)
    code = main(["equilibria", "--config", str(cfg_path), "--out",
                 str(tmp_path / "out")])
    assert code == 2
    assert "error (ConfigurationError)" in capsys.readouterr().err


def test_failed_check_sets_exit_code(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path, {
        "experiment": "stability-check",
        "params": {"m": 1.0, "lambda": 0.25},
        "potential": {"kind": "indicator", "half_width": 0.5, "amplitude": 1.0},
        "amplitude": 0.02,
        "t_end": 0.05,
    })
    out = tmp_path / "out"
    code = main(["stability-check", "--config", str(cfg_path), "--out", str(out),
                 "--no-plots"])
    assert code == 1
    stdout = capsys.readouterr().out
    assert "PASS deviation_never_doubles" in stdout
    assert "FAIL deviation_decays" in stdout
    assert stdout.strip().endswith("overall: FAIL")
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] is False


def test_console_script_installed(tmp_path):
    exe = shutil.which("aggrokin")
    if exe is None:
        pytest.skip("console script not on PATH")
    cfg_path = write_cfg(tmp_path, EQ_CFG)
    proc = subprocess.run(
        [exe, "equilibria", "--config", str(cfg_path), "--out",
         str(tmp_path / "out")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert "overall: PASS" in proc.stdout


def test_module_invocation(tmp_path):
    cfg_path = write_cfg(tmp_path, EQ_CFG)
    proc = subprocess.run(
        [sys.executable, "-m", "aggrokin.cli", "equilibria", "--config",
         str(cfg_path), "--out", str(tmp_path / "out")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
