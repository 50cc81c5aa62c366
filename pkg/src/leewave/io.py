"""Plain-text interchange files.

Every artifact is a versioned text file::

    # leewave-artifact 1
    # kind: spectrum
    [meta]
    {"F0": 1.0, ...}
    [table sigma]
    lambda,sigma
    0.001,0.0123...
    [end]

Metadata is one JSON object with sorted keys.  Tables are comma separated
with a header row; numbers are written with ``%.17g`` so that a round trip
is exact and identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputValidationError

FORMAT_VERSION = 1
_MAGIC = "# leewave-artifact"


# --------------------------------------------------------------------------
# Profiles and configuration
# --------------------------------------------------------------------------

def read_table(path):
    """Read a delimited text table with a header row.

    Lines starting with ``#`` and blank lines are skipped; the delimiter
    (comma, semicolon, tab or whitespace) is sniffed from the header.

    Returns
    -------
    dict
        Column name to float array.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputValidationError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 2:
        raise InputValidationError(f"{path} has no data rows")
    header = lines[0]
    delim = next((d for d in (",", ";", "\t") if d in header), None)
    rows = [ln.split(delim) if delim else ln.split() for ln in lines]
    names = [c.strip() for c in rows[0]]
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise InputValidationError(f"{path}: non-numeric entry ({exc})") from exc
    if data.shape[1] != len(names):
        raise InputValidationError(f"{path}: rows do not match the header")
    return {name: data[:, k] for k, name in enumerate(names)}


def read_config(path):
    """Read ``key = value`` lines (``#`` comments allowed) into a dict of strings."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{n}: empty key")
        out[key.replace("-", "_")] = value
    return out


# --------------------------------------------------------------------------
# Generic artifact container
# --------------------------------------------------------------------------

def _fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps_artifact(kind, meta, tables=()):
    """Serialize ``meta`` and ``(name, columns, array)`` tables to text."""
    buf = _io.StringIO()
    buf.write(f"{_MAGIC} {FORMAT_VERSION}\n# kind: {kind}\n[meta]\n")
    buf.write(json.dumps(_jsonable(meta), sort_keys=True) + "\n")
    for name, columns, array in tables:
        array = np.atleast_2d(np.asarray(array, dtype=float))
        if array.size == 0:
            array = array.reshape(0, len(columns))
        if array.shape[1] != len(columns):
            raise InputValidationError(f"table {name}: {array.shape[1]} columns, {len(columns)} names")
        buf.write(f"[table {name}]\n{','.join(columns)}\n")
        for row in array:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
    buf.write("[end]\n")
    return buf.getvalue()


def loads_artifact(text, expect=None):
    """Parse text written by :func:`dumps_artifact`.

    Returns
    -------
    kind : str
    meta : dict
    tables : dict
        Name to ``(columns, array)``.
    """
    lines = text.splitlines()
    if len(lines) < 4 or not lines[0].startswith(_MAGIC):
        raise InputValidationError("not a leewave artifact")
    version = int(lines[0].split()[-1])
    if version != FORMAT_VERSION:
        raise InputValidationError(f"unsupported artifact version {version}")
    kind = lines[1].split(":", 1)[1].strip()
    if expect is not None and kind != expect:
        raise InputValidationError(f"expected a {expect!r} artifact, found {kind!r}")
    if lines[2] != "[meta]":
        raise InputValidationError("artifact metadata block missing")
    meta = json.loads(lines[3])
    tables = {}
    k = 4
    while k < len(lines) and lines[k] != "[end]":
        head = lines[k]
        if not (head.startswith("[table ") and head.endswith("]")):
            raise InputValidationError(f"unexpected line in artifact: {head[:40]!r}")
        name = head[7:-1]
        columns = lines[k + 1].split(",")
        k += 2
        rows = []
        while k < len(lines) and not lines[k].startswith("["):
            try:
                rows.append([float(v) for v in lines[k].split(",")])
            except ValueError as exc:
                raise InputValidationError(f"table {name}, line {k + 1}: {exc}") from exc
            k += 1
        if any(len(r) != len(columns) for r in rows):
            raise InputValidationError(f"table {name}: rows do not match the header")
        array = np.array(rows, dtype=float).reshape(len(rows), len(columns))
        tables[name] = (columns, array)
    if k >= len(lines):
        raise InputValidationError("artifact is truncated (no [end] marker)")
    return kind, meta, tables


def write_artifact(path, kind, meta, tables=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_artifact(kind, meta, tables))
    return path


def read_artifact(path, expect=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputValidationError(f"cannot read {path}: {exc}") from exc
    return loads_artifact(text, expect)


def _matrix_table(name, matrix):
    matrix = np.asarray(matrix, dtype=float)
    return (name, [f"c{j}" for j in range(matrix.shape[1])], matrix)


# --------------------------------------------------------------------------
# ScorerData
# --------------------------------------------------------------------------

_SCORER_COLUMNS = ("z", "zeta", "u0", "T0", "A", "B", "C", "D", "E", "F", "beta")


def write_scorer(path, scorer):
    """One row per altitude node plus the uniform-zeta F table and a summary."""
    if scorer.zeta is None or scorer.F0 is None:
        raise InputValidationError("write_scorer needs mapped data with F0 (use with_asymptotics)")
    cols = np.column_stack([getattr(scorer, c) for c in _SCORER_COLUMNS])
    meta = dict(regime=scorer.regime, g=scorer.g, mu=scorer.mu, F0=scorer.F0,
                F_star=scorer.F_star, validation=scorer.validation)
    tables = [("nodes", list(_SCORER_COLUMNS), cols),
              ("uniform", ["zeta", "F"], np.column_stack([scorer.zeta_uniform, scorer.F_uniform]))]
    return write_artifact(path, "scorer", meta, tables)


def read_scorer(path):
    from .atmosphere import ScorerData

    _, meta, tables = read_artifact(path, "scorer")
    cols, arr = tables["nodes"]
    data = {c: arr[:, k] for k, c in enumerate(cols)}
    _, uni = tables["uniform"]
    return ScorerData(z=data["z"], u0=data["u0"], T0=data["T0"], A=data["A"], B=data["B"],
                      C=data["C"], D=data["D"], E=data["E"], F=data["F"], beta=data["beta"],
                      regime=meta["regime"], g=meta["g"], mu=meta["mu"], zeta=data["zeta"],
                      zeta_uniform=uni[:, 0], F_uniform=uni[:, 1], F0=meta["F0"],
                      F_star=meta["F_star"], validation=meta.get("validation", {}))


# --------------------------------------------------------------------------
# Potentials and SpectralData
# --------------------------------------------------------------------------

def potential_recipe(potential):
    """JSON-ready description from which :func:`potential_from_recipe` rebuilds it."""
    if potential.kind not in ("free", "morse", "samples"):
        raise InputValidationError(f"cannot serialize a {potential.kind!r} potential")
    params = dict(potential.params)
    if potential.kind == "samples":
        params = dict(zeta=list(map(float, params["zeta"])), F=list(map(float, params["F"])))
    return dict(kind=potential.kind, zeta_max=potential.zeta_max, F0=potential.F0,
                F_star=potential.F_star, params=params)


def potential_from_recipe(recipe):
    from .oracles import MorseParams
    from .spectral import Potential

    kind = recipe["kind"]
    if kind == "free":
        return Potential.free(recipe["F0"], recipe["zeta_max"])
    if kind == "morse":
        p = recipe["params"]
        return Potential.morse(MorseParams(p["Q"], p["a"], p["z0"], p["F0"]), recipe["zeta_max"])
    if kind == "samples":
        p = recipe["params"]
        return Potential.from_samples(p["zeta"], p["F"], recipe["F0"], recipe["F_star"],
                                      recipe["zeta_max"])
    raise InputValidationError(f"unknown potential kind {kind!r}")


def write_spectrum(path, spectral, zeta=None):
    """``(lambda, sigma)`` table, bound-state summary and profiles on ``zeta``."""
    if zeta is None:
        top = spectral.potential.zeta_max or 10.0
        zeta = np.linspace(0.0, top, 401)
    zeta = np.asarray(zeta, dtype=float)
    states = spectral.bound_states
    meta = dict(potential=potential_recipe(spectral.potential), step=spectral.step,
                n_bound=len(states))
    tables = [("sigma", ["lambda", "sigma"],
               np.column_stack([spectral.sigma_lambda, spectral.sigma_values])),
              ("bound_states", ["lambda", "norm2", "frequency"],
               np.array([[b.lam, b.norm2, b.frequency] for b in states]).reshape(len(states), 3))]
    profiles = np.column_stack([zeta] + [b.values(zeta) for b in states])
    tables.append(("profiles", ["zeta"] + [f"v{j + 1}" for j in range(len(states))], profiles))
    return write_artifact(path, "spectrum", meta, tables)


def read_spectrum(path):
    from .spectral import BoundState, SpectralData

    _, meta, tables = read_artifact(path, "spectrum")
    potential = potential_from_recipe(meta["potential"])
    _, sig = tables["sigma"]
    _, bs = tables["bound_states"]
    states = [BoundState(potential, lam, norm2=n2) for lam, n2, _ in bs]
    return SpectralData(potential, states, sig[:, 0].copy(), sig[:, 1].copy(), meta["step"])


# --------------------------------------------------------------------------
# KernelField
# --------------------------------------------------------------------------

def write_kernel(path, kernel):
    """Header with grids and constants, one matrix block per piece."""
    lat = kernel.lattice
    meta = dict(dx=lat.dx, m_lo=lat.m_lo, m_hi=lat.m_hi, F0=kernel.F0, F_star=kernel.F_star,
                F_ground=kernel.F_ground, u0_surface=kernel.u0_surface, pieces_meta=kernel.meta)
    tables = [("rows", ["zeta", "z", "E"], np.column_stack([kernel.zeta, kernel.z, kernel.E])),
              _matrix_table("evanescent_regular", kernel.ke),
              _matrix_table("radiated", kernel.kr),
              _matrix_table("trapped", kernel.kt)]
    return write_artifact(path, "kernel", meta, tables)


def read_kernel(path):
    from .kernel import KernelField, Lattice

    _, meta, tables = read_artifact(path, "kernel")
    rows = tables["rows"][1]
    lat = Lattice(meta["dx"], meta["m_lo"], meta["m_hi"])
    return KernelField(lat, rows[:, 0].copy(), tables["evanescent_regular"][1],
                       tables["radiated"][1], tables["trapped"][1], meta["F0"], meta["F_star"],
                       rows[:, 2].copy(), rows[:, 1].copy(), meta["u0_surface"],
                       meta.get("pieces_meta", {}), meta["F_ground"])


# --------------------------------------------------------------------------
# WaveField
# --------------------------------------------------------------------------

def write_field(directory, field, diagnostics=None):
    """Write ``field.txt`` (matrices), ``diagnostics.txt`` (key-value) and
    ``field_long.csv`` (x, zeta, z, w, wbar per row).

    Returns
    -------
    list of Path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = dict(F0=field.F0)
    tables = [("x", ["x"], field.x[:, None]),
              ("rows", ["zeta", "z"], np.column_stack([field.zeta, field.z])),
              ("boundary", ["x", "f"], np.column_stack([field.boundary.x, field.boundary.f])),
              _matrix_table("w", field.w), _matrix_table("wbar", field.wbar)]
    paths = [write_artifact(directory / "field.txt", "field", meta, tables)]

    diag = dict(field.diagnostics)
    if diagnostics:
        diag.update(diagnostics)
    lines = [f"{k} = {json.dumps(_jsonable(diag[k]), sort_keys=True)}" for k in sorted(diag)]
    p = directory / "diagnostics.txt"
    p.write_text("\n".join(lines) + ("\n" if lines else ""))
    paths.append(p)

    X, Zt = np.meshgrid(field.x, field.zeta)
    _, Z = np.meshgrid(field.x, field.z)
    long = np.column_stack([X.ravel(), Zt.ravel(), Z.ravel(), field.w.ravel(), field.wbar.ravel()])
    p = directory / "field_long.csv"
    with open(p, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "zeta", "z", "w", "wbar"])
        for row in long:
            writer.writerow([_fmt(v) for v in row])
    paths.append(p)
    return paths


def read_field(directory):
    from .field import BoundaryData, WaveField

    directory = Path(directory)
    _, meta, tables = read_artifact(directory / "field.txt", "field")
    bnd = tables["boundary"][1]
    rows = tables["rows"][1]
    diag = {}
    dpath = directory / "diagnostics.txt"
    if dpath.exists():
        for line in dpath.read_text().splitlines():
            key, value = line.split(" = ", 1)
            diag[key] = json.loads(value)
    return WaveField(tables["x"][1][:, 0].copy(), rows[:, 0].copy(), rows[:, 1].copy(),
                     tables["w"][1], tables["wbar"][1], BoundaryData(bnd[:, 0].copy(), bnd[:, 1].copy()),
                     meta["F0"], diag)


def output_dir(default="."):
    """Output directory: ``LEEWAVE_OUTPUT_DIR`` if set, else ``default``."""
    return Path(os.environ.get("LEEWAVE_OUTPUT_DIR") or default)
