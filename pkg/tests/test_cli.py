import json
import math

import numpy as np
import pytest

from cylpar.cli import EXIT_ERROR, EXIT_OK, main
from cylpar.spaces import Field, Grid1D, write_snapshot

SMALL_BLOCK = """
[[scenario]]
name = "{name}"
dt = {dt}
T = 0.2
grid = {{ L = 16.0, n_x = 64 }}
transverse = {{ kind = "dirichlet_laplacian", M = 2 }}
nonlinearity = {{ kind = "bistable" }}
initial = {{ generator = "random", amplitude = 0.3 }}
gates = ["no_blowup", "energy_nonincreasing"]
diagnostics = [{{ name = "ul_l2", norm = "ul" }}, {{ name = "energy", norm = "energy" }}]
"""


def write_config(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_empty_config_runs_nothing(tmp_path):
    cfg = write_config(tmp_path, "")
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "out") == EXIT_OK
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["blocks"] == [] and summary["exit_code"] == EXIT_OK


def test_nonpositive_dt_is_a_located_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL_BLOCK.format(name="a", dt=0.0))
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "out") == EXIT_ERROR
    assert "scenario[0].dt" in capsys.readouterr().err


def test_unknown_key_is_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL_BLOCK.format(name="a", dt=0.01) + "colour = 3\n")
    assert run("simulate", "--config", cfg, "--out-dir", tmp_path / "out") == EXIT_ERROR
    assert "colour" in capsys.readouterr().err


def test_config_and_preset_are_exclusive(tmp_path):
    cfg = write_config(tmp_path, "")
    assert run("simulate", "--config", cfg, "--preset", "corridor") == EXIT_ERROR


@pytest.mark.parametrize("name", ["corridor", "gradientflow", "advective"])
def test_simulation_presets_pass(name, tmp_path):
    out = tmp_path / "out"
    assert run("simulate", "--preset", name, "--out-dir", out) == EXIT_OK
    block = out / name
    assert (block / "trajectory.csv").exists() and (block / "summary.json").exists()
    assert not any(p.name.endswith(".partial") for p in out.iterdir())


def test_mode_block_lab_preset(tmp_path, capsys):
    assert run("lab", "--preset", "figure2", "--out-dir", tmp_path) == EXIT_OK
    assert "figure2/mode_blocks: PASS" in capsys.readouterr().out


def test_spectrum_command(tmp_path, capsys):
    assert run("spectrum", "--kind", "dirichlet_laplacian", "--M", 3, "--out-dir", tmp_path) == EXIT_OK
    rows = [line.split() for line in capsys.readouterr().out.splitlines() if not line.startswith("#")]
    assert [float(r[1]) for r in rows] == pytest.approx([1.0, 4.0, 9.0], rel=1e-15)
    assert (tmp_path / "dirichlet_laplacian_spectrum.txt").exists()


def test_norms_command_reports_exact_values(tmp_path, capsys):
    g = Grid1D(8.0, 64)
    write_snapshot(tmp_path / "u.npz", Field(g, np.full((64, 1), 2.0)), time=1.5)
    assert run("norms", tmp_path / "u.npz", "--out-dir", tmp_path) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["time"] == 1.5
    assert report["sup"] == 2.0
    # unit window of a constant: sqrt(2 * radius) * 2
    assert report["ul"] == pytest.approx(2.0 * math.sqrt(2 * g.window_half * g.dx), rel=1e-14)
    assert json.loads((tmp_path / "norms.json").read_text()) == report


def test_fast_verification_suite_passes(capsys):
    assert run("verify", "fast") == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_ledger_sign_mutation_is_caught_and_localized(capsys):
    assert run("verify", "fast", "--mutate", "ledger-sign") != EXIT_OK
    failing = [line for line in capsys.readouterr().out.splitlines() if " FAIL " in line]
    assert failing and all(line.startswith("dissipation ledger") for line in failing)


def test_outputs_do_not_depend_on_thread_count(tmp_path):
    text = SMALL_BLOCK.format(name="a", dt=0.01) + SMALL_BLOCK.format(name="b", dt=0.02)
    cfg = write_config(tmp_path, text)
    for threads in (1, 2):
        assert run("simulate", "--config", cfg, "--seed", 7, "--threads", threads,
                   "--out-dir", tmp_path / f"t{threads}") == EXIT_OK
    for name in ("a", "b"):
        one = (tmp_path / "t1" / name / "trajectory.csv").read_bytes()
        two = (tmp_path / "t2" / name / "trajectory.csv").read_bytes()
        assert one == two
