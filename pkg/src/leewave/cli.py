"""Command-line pipeline: ``scorer -> spectrum -> kernel -> solve``, plus ``validate``.

Options come from, in increasing priority: built-in defaults, a ``--config``
file of ``key = value`` lines (keys are option names with ``_`` or ``-``),
the ``LEEWAVE_OUTPUT_DIR`` environment variable (output directory only) and
command-line flags.

Exit codes: 0 success, 1 failed validation checks, 2 configuration error,
3 invalid input, 4 no positive asymptotic Scorer constant, 5 numerical
convergence failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as lio
from .errors import AssumptionError, ConfigError, ConvergenceError, InputValidationError

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_CONVERGENCE = 0, 1, 2, 3, 4, 5
OUTPUT_ENV = "LEEWAVE_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _csv_floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _csv_words(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


# name -> (type, default, help); every option defaults to None on the parser so
# that config values can fill the gaps before these defaults apply
_OPTIONS = {
    "scorer": {
        "profile": (str, None, "profile table (altitude, wind, temperature[, density, pressure])"),
        "units": (str, "dimensional", "dimensional (SI) or nondimensional input"),
        "regime": (str, "full", "full, classical or boussinesq"),
        "tail_fraction": (float, 0.2, "top fraction of the zeta grid averaged for F0"),
        "spline_bc": (str, "natural", "cubic spline end condition"),
        "n_uniform": (int, 256, "points of the uniform zeta grid for F"),
        "output": (str, "scorer.txt", "output file name"),
    },
    "spectrum": {
        "scorer": (str, None, "ScorerData file from 'scorer'"),
        "potential": (str, None, "built-in potential instead of --scorer: morse or free"),
        "F0": (float, 1.0, "asymptotic Scorer constant of a built-in potential"),
        "morse_Q": (float, None, "Morse depth (default: canonical well)"),
        "morse_a": (float, None, "Morse decay rate"),
        "morse_z0": (float, None, "Morse centre"),
        "zeta_max": (float, None, "truncation altitude of the potential"),
        "rtol": (float, 1e-10, "ODE relative tolerance"),
        "output": (str, "spectrum.txt", "output file name"),
    },
    "kernel": {
        "spectrum": (str, None, "SpectralData file from 'spectrum'"),
        "scorer": (str, None, "optional ScorerData file supplying E, z and the surface wind"),
        "dx": (float, 0.1, "lattice spacing"),
        "x_min": (float, -20.0, "left end of the lattice"),
        "x_max": (float, 20.0, "right end of the lattice"),
        "zeta_min": (float, 0.1, "lowest row"),
        "zeta_max": (float, 5.0, "highest row"),
        "n_zeta": (int, 50, "number of rows"),
        "mu_max": (float, None, "evanescent truncation (default 50/min(|x|, 1))"),
        "panel_width": (float, None, "largest Gauss panel in mu"),
        "nodes_per_panel": (int, 16, "Gauss nodes per mu panel"),
        "n_theta": (int, 512, "Gauss nodes for the radiated piece"),
        "pieces": (_csv_words, "evanescent,radiated,trapped", "comma-separated kernel pieces"),
        "output": (str, "kernel.txt", "output file name"),
    },
    "solve": {
        "kernel": (str, None, "KernelField file from 'kernel'"),
        "spectrum": (str, None, "optional SpectralData file enabling the radiation diagnostic"),
        "terrain": (str, "agnesi", "agnesi, bump, flat or file"),
        "terrain_file": (str, None, "terrain table with columns x, h (for --terrain file)"),
        "h0": (float, 1.0, "mountain height"),
        "b": (float, 1.0, "Agnesi half-width"),
        "center": (float, 0.0, "Agnesi centre"),
        "half_width": (float, None, "truncate the Agnesi mountain to |x - center| <= half_width"),
        "left": (float, -5.0, "bump left end"),
        "right": (float, 5.0, "bump right end"),
        "f_min": (float, -10.0, "left end of the boundary grid"),
        "f_max": (float, 10.0, "right end of the boundary grid"),
        "x_min": (float, None, "left end of the field window (default: widest possible)"),
        "x_max": (float, None, "right end of the field window"),
        "u0_surface": (float, None, "surface wind (default from the kernel file)"),
        "window": (_csv_floats, "-60,-20", "upstream window for the radiation diagnostic"),
        "output": (str, "field", "output sub-directory"),
    },
    "validate": {
        "json": (str, "validation.json", "machine-readable report file name"),
    },
}


@dataclass
class RunConfig:
    """Resolved options of one command."""

    subcommand: str
    options: dict
    output_dir: Path
    deterministic: bool = field(default=True, init=False)

    def __post_init__(self):
        o = self.options
        for key in ("rtol", "tail_fraction"):
            if key in o and o[key] is not None and not o[key] > 0:
                raise ConfigError(f"{key} must be positive")
        for key in ("n_theta", "n_uniform", "n_zeta"):
            if key in o and o[key] is not None and o[key] < 16:
                raise ConfigError(f"{key} must be at least 16")
        if self.subcommand == "kernel":
            if not o["dx"] > 0:
                raise ConfigError("dx must be positive")
            if int(round((o["x_max"] - o["x_min"]) / o["dx"])) < 16:
                raise ConfigError("the lattice needs at least 16 columns")
            if not 0 <= o["zeta_min"] < o["zeta_max"]:
                raise ConfigError("need 0 <= zeta_min < zeta_max")

    def __getitem__(self, key):
        return self.options[key]


def build_parser():
    parser = _Parser(prog="leewave", description="Linear lee waves by spectral transform.")
    parser.add_argument("--version", action="version", version=f"leewave {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, opts in _OPTIONS.items():
        p = sub.add_parser(name, help=f"{name} step")
        p.add_argument("--config", default=None, help="key = value configuration file")
        p.add_argument("--output-dir", dest="output_dir", default=None,
                       help=f"output directory (also {OUTPUT_ENV}; default '.')")
        for key, (typ, default, text) in opts.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None,
                           help=f"{text} [default: {default}]")
    return parser


def resolve(argv=None, environ=None):
    """Parse ``argv`` and merge config file, environment and defaults into a :class:`RunConfig`."""
    environ = os.environ if environ is None else environ
    ns = build_parser().parse_args(argv)
    cmd = ns.subcommand
    config = lio.read_config(ns.config) if ns.config else {}
    spec = _OPTIONS[cmd]
    unknown = set(config) - set(spec) - {"output_dir"}
    if unknown:
        raise ConfigError(f"unknown configuration keys for '{cmd}': {sorted(unknown)}")
    options = {}
    for key, (typ, default, _) in spec.items():
        value = getattr(ns, key)
        if value is None and key in config:
            try:
                value = typ(config[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {config[key]!r}") from exc
        if value is None and default is not None:
            value = typ(default) if isinstance(default, str) and typ is not str else default
        options[key] = value
    out = ns.output_dir or environ.get(OUTPUT_ENV) or config.get("output_dir") or "."
    return RunConfig(cmd, options, Path(out))


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def _need(cfg, key):
    if cfg[key] is None:
        raise ConfigError(f"'{cfg.subcommand}' needs --{key.replace('_', '-')}")
    return cfg[key]


def cmd_scorer(cfg):
    from .atmosphere import compute_scorer, liouville_map, load_profile, with_asymptotics

    profile = load_profile(_need(cfg, "profile"), cfg["units"])
    scorer = compute_scorer(profile, cfg["regime"], cfg["spline_bc"])
    scorer = with_asymptotics(liouville_map(scorer, cfg["n_uniform"]), cfg["tail_fraction"])
    path = lio.write_scorer(cfg.output_dir / cfg["output"], scorer)
    return [path], dict(F0=scorer.F0, F_star=scorer.F_star)


def cmd_spectrum(cfg):
    from .oracles import MorseParams
    from .spectral import Potential, spectral_data

    if cfg["scorer"] is not None:
        potential = Potential.from_scorer(lio.read_scorer(cfg["scorer"]), cfg["zeta_max"])
    elif cfg["potential"] == "morse":
        base = MorseParams.canonical(cfg["F0"])
        params = MorseParams(cfg["morse_Q"] if cfg["morse_Q"] is not None else base.Q,
                             cfg["morse_a"] if cfg["morse_a"] is not None else base.a,
                             cfg["morse_z0"] if cfg["morse_z0"] is not None else base.z0, cfg["F0"])
        potential = params.potential(cfg["zeta_max"] if cfg["zeta_max"] is not None else 30.0)
    elif cfg["potential"] == "free":
        potential = Potential.free(cfg["F0"], 0.0)
    else:
        raise ConfigError("'spectrum' needs --scorer or --potential morse|free")
    spectral = spectral_data(potential, rtol=cfg["rtol"])
    path = lio.write_spectrum(cfg.output_dir / cfg["output"], spectral)
    return [path], dict(F0=spectral.F0, n_bound=len(spectral.bound_states))


def cmd_kernel(cfg):
    from .kernel import Lattice, kernel_field

    spectral = lio.read_spectrum(_need(cfg, "spectrum"))
    lattice = Lattice.covering(cfg["dx"], cfg["x_min"], cfg["x_max"])
    zeta = np.linspace(cfg["zeta_min"], cfg["zeta_max"], cfg["n_zeta"])
    E = z = None
    u0 = 1.0
    if cfg["scorer"] is not None:
        scorer = lio.read_scorer(cfg["scorer"])
        E, z, u0 = scorer.E_of_zeta(zeta), scorer.z_of_zeta(zeta), scorer.u0_surface
        if not (np.all(np.isfinite(E)) and np.all(np.isfinite(z))):
            raise InputValidationError("kernel rows extend beyond the profile's zeta range")
    kf = kernel_field(spectral, lattice, zeta, cfg["mu_max"], cfg["panel_width"],
                      cfg["nodes_per_panel"], cfg["n_theta"], tuple(cfg["pieces"]), E, z, u0)
    path = lio.write_kernel(cfg.output_dir / cfg["output"], kf)
    return [path], dict(columns=len(lattice), rows=len(zeta))


def _terrain(cfg):
    from .field import TerrainProfile

    kind = cfg["terrain"]
    if kind == "agnesi":
        return TerrainProfile.agnesi(cfg["h0"], cfg["b"], cfg["center"], cfg["half_width"])
    if kind == "bump":
        return TerrainProfile.bump(cfg["h0"], cfg["left"], cfg["right"])
    if kind == "flat":
        return TerrainProfile.flat()
    if kind == "file":
        table = lio.read_table(_need(cfg, "terrain_file"))
        if "x" not in table or "h" not in table:
            raise InputValidationError("terrain file needs columns x and h")
        return TerrainProfile.from_samples(table["x"], table["h"])
    raise ConfigError(f"unknown terrain {kind!r}")


def cmd_solve(cfg):
    from .field import (boundary_data, f_grid, radiation_diagnostic, solve, stability_report)

    kernel = lio.read_kernel(_need(cfg, "kernel"))
    dx = kernel.dx
    u0 = cfg["u0_surface"] if cfg["u0_surface"] is not None else kernel.u0_surface
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bd = boundary_data(_terrain(cfg), u0, f_grid(dx, cfg["f_min"], cfg["f_max"]))
    x = None
    if cfg["x_min"] is not None or cfg["x_max"] is not None:
        lo = cfg["x_min"] if cfg["x_min"] is not None else cfg["f_min"]
        hi = cfg["x_max"] if cfg["x_max"] is not None else cfg["f_max"]
        x = np.arange(int(np.ceil(lo / dx - 1e-9)), int(np.floor(hi / dx + 1e-9)) + 1) * dx
    wf = solve(kernel, bd, x)
    diag = dict(stability=stability_report(wf), warnings=[str(w.message) for w in caught])
    if cfg["spectrum"] is not None and bd.support() is not None:
        lo, hi = cfg["window"]
        if wf.x[0] <= lo and bd.support()[0] > hi:
            diag["radiation"] = radiation_diagnostic(wf, lio.read_spectrum(cfg["spectrum"]), (lo, hi))
    paths = lio.write_field(cfg.output_dir / cfg["output"], wf, diag)
    return paths, dict(sup_w=diag["stability"]["sup_w"])


def cmd_validate(cfg):
    from .validation import as_records, format_report, run_checks

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = run_checks()
    print(format_report(results))
    payload = dict(passed=all(r.passed for r in results), checks=as_records(results))
    path = cfg.output_dir / cfg["json"]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return [path], dict(passed=payload["passed"])


COMMANDS = dict(scorer=cmd_scorer, spectrum=cmd_spectrum, kernel=cmd_kernel, solve=cmd_solve,
                validate=cmd_validate)


def run(cfg):
    """Execute a resolved command; returns ``(exit_code, paths, summary)``."""
    paths, summary = COMMANDS[cfg.subcommand](cfg)
    code = EXIT_OK
    if cfg.subcommand == "validate" and not summary["passed"]:
        code = EXIT_CHECKS
    return code, paths, summary


def main(argv=None):
    try:
        cfg = resolve(argv)
        code, paths, summary = run(cfg)
    except ConfigError as exc:
        print(f"leewave: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionError as exc:
        print(f"leewave: assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except InputValidationError as exc:
        print(f"leewave: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"leewave: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        # parameter checks in the oracles raise plain ValueError
        print(f"leewave: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for p in paths:
        print(f"wrote {p}")
    if summary:
        print(json.dumps(lio._jsonable(summary), sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
