import json
import subprocess
import sys

import numpy as np
import pytest

from leewave import cli
from leewave import io as lio
from leewave.atmosphere import sample_profile_path
from leewave.errors import ConvergenceError

KERNEL_ARGS = ["--dx", "0.2", "--x-min", "-75", "--x-max", "15", "--zeta-min", "0.25",
               "--zeta-max", "4", "--n-zeta", "16"]
SOLVE_ARGS = ["--terrain", "bump", "--left", "-5", "--right", "5", "--f-min", "-6", "--f-max", "6"]


def _morse_pipeline(out):
    out = str(out)
    assert cli.main(["spectrum", "--potential", "morse", "--output-dir", out]) == 0
    assert cli.main(["kernel", "--spectrum", f"{out}/spectrum.txt", "--output-dir", out]
                    + KERNEL_ARGS) == 0
    assert cli.main(["solve", "--kernel", f"{out}/kernel.txt", "--spectrum", f"{out}/spectrum.txt",
                     "--output-dir", out] + SOLVE_ARGS) == 0


@pytest.fixture(scope="module")
def morse_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("morse")
    _morse_pipeline(out)
    return out


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_morse_pipeline_outputs(morse_run):
    wf = lio.read_field(morse_run / "field")
    assert wf.w.shape[0] == 16 and np.all(np.isfinite(wf.w))
    diag = wf.diagnostics
    assert diag["stability"]["sup_w"] > 0
    assert diag["radiation"]["leading_power"] == 3
    sp = lio.read_spectrum(morse_run / "spectrum.txt")
    assert len(sp.bound_states) == 1


def test_reruns_are_byte_identical(morse_run, tmp_path):
    _morse_pipeline(tmp_path)
    assert _tree_bytes(tmp_path) == _tree_bytes(morse_run)


def test_profile_pipeline(tmp_path):
    out = str(tmp_path)
    assert cli.main(["scorer", "--profile", str(sample_profile_path()), "--output-dir", out]) == 0
    assert cli.main(["spectrum", "--scorer", f"{out}/scorer.txt", "--output-dir", out]) == 0
    assert cli.main(["kernel", "--spectrum", f"{out}/spectrum.txt", "--scorer", f"{out}/scorer.txt",
                     "--dx", "0.25", "--x-min", "-20", "--x-max", "20", "--zeta-max", "3",
                     "--n-zeta", "16", "--output-dir", out]) == 0
    assert cli.main(["solve", "--kernel", f"{out}/kernel.txt", "--terrain", "agnesi",
                     "--half-width", "5", "--f-min", "-5", "--f-max", "5", "--output-dir", out]) == 0
    wf = lio.read_field(tmp_path / "field")
    assert np.all(np.isfinite(wf.w)) and not np.allclose(wf.z, wf.zeta)
    assert np.allclose(wf.wbar * lio.read_kernel(tmp_path / "kernel.txt").E[:, None], wf.w)


def test_validate_writes_report(tmp_path, capsys):
    assert cli.main(["validate", "--output-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["passed"] and len(report["checks"]) == 7
    assert "7/7 checks passed" in capsys.readouterr().out


def test_failed_validation_exit_code(tmp_path, monkeypatch):
    from leewave import validation

    bad = validation.Check("always fails", 1.0, 0.0, False)
    monkeypatch.setattr(validation, "run_checks", lambda: [bad])
    assert cli.main(["validate", "--output-dir", str(tmp_path)]) == cli.EXIT_CHECKS


def test_precedence_flags_env_config_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dx = 0.5\nx-min = -30\noutput_dir = from_config\n")
    base = ["kernel", "--spectrum", "s.txt", "--config", str(cfg)]
    r = cli.resolve(base, environ={})
    assert r["dx"] == 0.5 and r["x_min"] == -30 and r["x_max"] == 20.0
    assert str(r.output_dir) == "from_config"
    r = cli.resolve(base, environ={"LEEWAVE_OUTPUT_DIR": "from_env"})
    assert str(r.output_dir) == "from_env"
    r = cli.resolve(base + ["--dx", "0.25", "--output-dir", "from_flag"],
                    environ={"LEEWAVE_OUTPUT_DIR": "from_env"})
    assert r["dx"] == 0.25 and str(r.output_dir) == "from_flag"
    assert str(cli.resolve(["kernel"], environ={}).output_dir) == "."


def test_env_output_dir_used_by_main(tmp_path, monkeypatch):
    monkeypatch.setenv("LEEWAVE_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["spectrum", "--potential", "free", "--F0", "2"]) == 0
    assert (tmp_path / "env" / "spectrum.txt").exists()


@pytest.mark.parametrize("argv", [
    ["kernel", "--dx", "-1", "--spectrum", "x"],
    ["kernel", "--spectrum", "x", "--zeta-min", "3", "--zeta-max", "1"],
    ["kernel", "--spectrum", "x", "--n-theta", "4"],
    ["kernel"],
    ["spectrum"],
    ["frobnicate"],
    ["kernel", "--dx", "abc"],
])
def test_configuration_errors(argv, tmp_path):
    assert cli.main(argv + ["--output-dir", str(tmp_path)] if argv[0] != "frobnicate" else argv) \
        == cli.EXIT_CONFIG


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert cli.main(["kernel", "--spectrum", "x", "--config", str(cfg)]) == cli.EXIT_CONFIG


def test_input_errors(tmp_path):
    out = str(tmp_path)
    assert cli.main(["kernel", "--spectrum", f"{out}/missing.txt", "--output-dir", out]) \
        == cli.EXIT_INPUT
    (tmp_path / "junk.txt").write_text("not an artifact\n")
    assert cli.main(["solve", "--kernel", f"{out}/junk.txt", "--output-dir", out]) == cli.EXIT_INPUT
    # Morse parameter checks raise plain ValueError
    assert cli.main(["spectrum", "--potential", "morse", "--morse-a", "-1", "--output-dir", out]) \
        == cli.EXIT_INPUT


def test_nonpositive_asymptotic_constant(tmp_path):
    # super-adiabatic layer aloft drives the tail of F negative
    z = np.linspace(0, 20000, 81)
    T = np.where(z < 10000, 300 - 0.005 * z, 250 - 0.012 * (z - 10000))
    p = tmp_path / "unstable.csv"
    p.write_text("altitude,wind,temperature\n"
                 + "".join(f"{a},10,{c}\n" for a, c in zip(z, T)))
    assert cli.main(["scorer", "--profile", str(p), "--output-dir", str(tmp_path)]) \
        == cli.EXIT_ASSUMPTION


def test_convergence_exit_code(monkeypatch, tmp_path):
    def boom(cfg):
        raise ConvergenceError("no bracket")

    monkeypatch.setitem(cli.COMMANDS, "spectrum", boom)
    assert cli.main(["spectrum", "--output-dir", str(tmp_path)]) == cli.EXIT_CONVERGENCE


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "leewave.cli", "spectrum", "--potential", "free",
                          "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and "wrote" in res.stdout
    res = subprocess.run([sys.executable, "-m", "leewave.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("leewave ")
