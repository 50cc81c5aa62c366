import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leewave import io as lio
from leewave.atmosphere import (compute_scorer, liouville_map, load_profile, sample_profile_path,
                                with_asymptotics)
from leewave.errors import ConfigError, InputValidationError
from leewave.field import BoundaryData, f_grid, solve
from leewave.kernel import Lattice, kernel_field


@pytest.fixture(scope="module")
def scorer():
    prof = load_profile(sample_profile_path())
    return with_asymptotics(liouville_map(compute_scorer(prof), 256))


@pytest.fixture(scope="module")
def small_kernel(morse_spectral):
    zeta = np.array([0.5, 1.0, 2.0])
    return kernel_field(morse_spectral, Lattice.covering(0.1, -6.1, 6.1), zeta,
                        E=np.array([1.0, 1.5, 2.0]), z=zeta * 0.9, u0_surface=0.8)


@given(st.floats(allow_nan=False, allow_infinity=True))
def test_number_format_round_trips_exactly(x):
    assert float(lio._fmt(x)) == x


def test_artifact_round_trip_and_bytes():
    tables = [("t", ["a", "b"], np.array([[0.1, 1e-300], [np.pi, -2.5]]))]
    text = lio.dumps_artifact("demo", {"z": 1, "a": [1.5, 2]}, tables)
    assert text == lio.dumps_artifact("demo", {"a": [1.5, 2], "z": 1}, tables)
    kind, meta, out = lio.loads_artifact(text, "demo")
    assert kind == "demo" and meta == {"a": [1.5, 2], "z": 1}
    cols, arr = out["t"]
    assert cols == ["a", "b"] and np.array_equal(arr, tables[0][2])


def test_empty_table_round_trip():
    text = lio.dumps_artifact("demo", {}, [("e", ["a", "b", "c"], np.zeros((0, 3)))])
    _, _, out = lio.loads_artifact(text)
    assert out["e"][1].shape == (0, 3)


@pytest.mark.parametrize("mutate", [
    lambda t: t.replace("artifact 1", "artifact 99", 1),
    lambda t: t.replace("[end]", ""),
    lambda t: "hello\n" + t,
    lambda t: t.replace("[meta]", "[data]"),
])
def test_malformed_artifacts_rejected(mutate):
    text = lio.dumps_artifact("demo", {}, [("t", ["a"], np.ones((2, 1)))])
    with pytest.raises(InputValidationError):
        lio.loads_artifact(mutate(text))


def test_wrong_kind_rejected():
    with pytest.raises(InputValidationError):
        lio.loads_artifact(lio.dumps_artifact("demo", {}), expect="kernel")


def test_scorer_round_trip(scorer, tmp_path):
    p = lio.write_scorer(tmp_path / "s.txt", scorer)
    back = lio.read_scorer(p)
    for name in ("z", "zeta", "u0", "A", "E", "F", "zeta_uniform", "F_uniform"):
        assert np.array_equal(getattr(back, name), getattr(scorer, name))
    assert back.F0 == scorer.F0 and back.regime == scorer.regime
    assert lio.write_scorer(tmp_path / "s2.txt", back).read_bytes() == p.read_bytes()


def test_spectrum_round_trip(morse_spectral, tmp_path):
    p = lio.write_spectrum(tmp_path / "sp.txt", morse_spectral)
    back = lio.read_spectrum(p)
    assert np.array_equal(back.sigma_lambda, morse_spectral.sigma_lambda)
    assert np.array_equal(back.sigma_values, morse_spectral.sigma_values)
    assert [b.lam for b in back.bound_states] == [b.lam for b in morse_spectral.bound_states]
    assert back.potential.F(np.array([0.5]))[0] == morse_spectral.potential.F(np.array([0.5]))[0]
    assert lio.write_spectrum(tmp_path / "sp2.txt", back).read_bytes() == p.read_bytes()


def test_kernel_round_trip(small_kernel, tmp_path):
    p = lio.write_kernel(tmp_path / "k.txt", small_kernel)
    back = lio.read_kernel(p)
    assert np.array_equal(back.total(), small_kernel.total())
    assert np.array_equal(back.zeta, small_kernel.zeta)
    assert back.u0_surface == 0.8 and back.F_ground == small_kernel.F_ground
    assert lio.write_kernel(tmp_path / "k2.txt", back).read_bytes() == p.read_bytes()


def test_field_round_trip(small_kernel, tmp_path):
    x = f_grid(0.1, -2, 2)
    wf = solve(small_kernel, BoundaryData(x, np.sin(3 * x)), np.arange(-30, 31) * 0.1)
    paths = lio.write_field(tmp_path / "f", wf, {"note": {"k": 1.5}})
    assert {p.name for p in paths} == {"field.txt", "diagnostics.txt", "field_long.csv"}
    back = lio.read_field(tmp_path / "f")
    assert np.array_equal(back.w, wf.w) and np.array_equal(back.wbar, wf.wbar)
    assert np.array_equal(back.z, wf.z) and np.array_equal(back.boundary.f, wf.boundary.f)
    assert back.diagnostics["note"] == {"k": 1.5}
    long = lio.read_table(tmp_path / "f" / "field_long.csv")
    assert np.array_equal(long["w"], wf.w.ravel())


@pytest.mark.parametrize("sep", [",", ";", "\t", "  "])
def test_read_table_delimiters(tmp_path, sep):
    p = tmp_path / "t.txt"
    p.write_text(f"# comment\nx{sep}h\n\n1{sep}2.5\n3{sep}-4e-3\n")
    t = lio.read_table(p)
    assert np.array_equal(t["x"], [1, 3]) and np.array_equal(t["h"], [2.5, -4e-3])


def test_read_table_errors(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("x,h\n1,abc\n")
    with pytest.raises(InputValidationError):
        lio.read_table(p)
    p.write_text("x,h\n")
    with pytest.raises(InputValidationError):
        lio.read_table(p)
    with pytest.raises(InputValidationError):
        lio.read_table(tmp_path / "missing.txt")


def test_read_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# header\ndx = 0.2  # spacing\nx-min=-5\n\n")
    assert lio.read_config(p) == {"dx": "0.2", "x_min": "-5"}
    p.write_text("dx 0.2\n")
    with pytest.raises(ConfigError):
        lio.read_config(p)
    with pytest.raises(ConfigError):
        lio.read_config(tmp_path / "missing.cfg")


def test_output_dir_env(monkeypatch):
    monkeypatch.setenv("LEEWAVE_OUTPUT_DIR", "/tmp/somewhere")
    assert str(lio.output_dir()) == "/tmp/somewhere"
    monkeypatch.delenv("LEEWAVE_OUTPUT_DIR")
    assert str(lio.output_dir("x")) == "x"
