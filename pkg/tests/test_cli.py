import os

import numpy as np
import pytest

from vbgk.cli import PLANE_NAMES, locked_dir, DirectoryLocked, main, read_snapshot
from vbgk.config import ConfigError, parse_config

MINIMAL = """\
# minimal run
epsilon = 0.1
nu = 0.01
lambda = 30
tau = 5.555555555555556e-05
grid = 16
T = 0.02
"""


def test_minimal_config_parses_and_derives_a():
    cfg = parse_config(MINIMAL, "run", environ={})
    assert cfg.a == pytest.approx(0.1, rel=1e-12) and cfg.grid == (16, 16)
    assert ("a", cfg.a) in cfg.resolved()


def test_tau_and_a_together_names_both_lines():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "a = 0.1\n", "run", environ={})
    assert any("line 5" in where and "line 8" in where for where, _ in info.value.errors)


@pytest.mark.parametrize("line, fragment", [
    ("epsilon = -0.1", "domain error"),
    ("probe_every = 0", "domain error"),
    ("grid = seven", "type error"),
    ("colour = red", "unknown key"),
    ("T = 0.5", "duplicate key"),
])
def test_config_errors_carry_locations(line, fragment):
    key = line.split("=")[0].strip()
    keep = [l for l in MINIMAL.splitlines() if fragment == "duplicate key" or not l.startswith(key + " ")]
    text = "\n".join(keep) + "\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text + line + "\n", "run", environ={})
    assert any(fragment in msg and where.startswith("line") for where, msg in info.value.errors)


def test_missing_keys_reported():
    with pytest.raises(ConfigError) as info:
        parse_config("epsilon = 0.1\n", "run", environ={})
    messages = " ".join(msg for _, msg in info.value.errors)
    for key in ("lambda", "grid", "'T'", "nu", "tau"):
        assert key in messages


def test_environment_override():
    cfg = parse_config(MINIMAL, "run", environ={"VBGK_CFG_T": "0.04"})
    assert cfg.T == 0.04 and cfg.sources["T"] == "environment VBGK_CFG_T"


def _write(tmp_path, text, name="cfg.txt"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_cli_certify_reference_point(tmp_path, capsys):
    cfg = _write(tmp_path, "epsilon = 0.1\na = 0.1\nlambda = 30\nnu = 0.01\n")
    assert main(["certify", "--config", cfg, "--out", str(tmp_path / "c")]) == 0
    kv = (tmp_path / "c" / "certification.kv").read_text().splitlines()
    assert kv and all(line.endswith("pass=true") for line in kv)
    assert not (tmp_path / "c" / ".lock").exists()


def test_cli_constants(capsys):
    assert main(["constants", "--a", "0.3", "--lambda", "30"]) != 0
    assert "0 < a < 1/4" in capsys.readouterr().out
    assert main(["constants", "--a", "0.1", "--lambda", "5"]) != 0
    assert "INFEASIBLE" in capsys.readouterr().out
    assert main(["constants", "--a", "0.1", "--lambda", "30"]) == 0
    assert "mu = 1.75" in capsys.readouterr().out


def test_cli_run_zero_probe_interval_is_config_error(tmp_path):
    cfg = _write(tmp_path, MINIMAL + "probe_every = 0\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == 2


def test_cli_run_outputs(tmp_path):
    cfg = _write(tmp_path, MINIMAL + "probe_every = 2\nsnapshot_every = 10\n")
    out = tmp_path / "r"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    manifest = dict(line.split(" = ", 1) for line in (out / "manifest.txt").read_text().splitlines())
    for key in ("code_version", "grid", "dt", "n_steps", "final_time", "epsilon", "certification"):
        assert key in manifest
    assert manifest["certification"] == "pass"
    header, planes = read_snapshot(str(out / "snapshots" / "snap_00000000.bin"))
    assert planes.shape == (len(PLANE_NAMES), 16, 16) and header["step"] == "0"
    np.testing.assert_allclose(planes[15], 1.0)  # rho of the initial state
    n = int(manifest["n_steps"])
    assert (out / "snapshots" / f"snap_{n:08d}.bin").exists()
    assert (out / "diagnostics.csv").read_text().count("\n") >= 2


def test_cli_run_reproducible(tmp_path):
    cfg = _write(tmp_path, MINIMAL)
    for name in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()


def test_cli_convergence_exit_reflects_trends(tmp_path):
    cfg = _write(tmp_path, MINIMAL.replace("epsilon = 0.1", "eps_list = 0.2, 0.1"))
    status = main(["convergence", "--config", cfg, "--out", str(tmp_path / "v")])
    summary = (tmp_path / "v" / "summary.txt").read_text()
    assert status == (0 if "FAIL" not in summary else 1)
    assert (tmp_path / "v" / "convergence.csv").exists()


def test_lockfile_blocks_second_writer(tmp_path):
    with locked_dir(str(tmp_path / "x")):
        with pytest.raises(DirectoryLocked):
            with locked_dir(str(tmp_path / "x")):
                pass
    assert not os.path.exists(tmp_path / "x" / ".lock")
