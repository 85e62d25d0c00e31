"""Command-line entry point: ``twoway-relay <subcommand> [options]``.

Powers are given in dB on the command line and in config files.  Values are
resolved in the order command-line flag, config file, built-in default.
Exit status is 0 on success, 1 for invalid input and 2 when a solver fails.
"""
from __future__ import annotations

import argparse
import configparser
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import scaling
from .experiments import (OUTPUTS, PRESETS, SWEEPS, ConfigError, ExperimentConfig, Table,
                          emit_csv, render_csv, reproduce_preset, run_experiment)
from .gp import GpError
from .model import FadingProfile, ScalingSpec, Scenario, SystemConfig, db_to_linear

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2

# option name -> (config section, parser)
FIELDS = {
    "M": ("system", int), "N": ("system", int), "tau_c": ("system", int),
    "tau_p": ("system", int), "beta_AR": ("system", str), "beta_RB": ("system", str),
    "p_u_db": ("powers", float), "p_r_db": ("powers", float), "p_p_db": ("powers", float),
    "relay_rule": ("powers", str), "pilot_rule": ("powers", str), "P_db": ("powers", float),
    "scenario": ("scaling", str), "alpha": ("scaling", str), "beta_exp": ("scaling", str),
    "gamma": ("scaling", str), "E_u_db": ("scaling", float), "E_r_db": ("scaling", float),
    "E_p_db": ("scaling", float),
    "sweep": ("sweep", str), "grid": ("sweep", str), "outputs": ("sweep", str),
    "seed": ("run", int), "trials": ("run", int), "out": ("run", str),
    "af_form": ("run", str), "pairing": ("run", str),
}
DEFAULT_SWEEP = {"stats": "p_p_db", "mc": "p_u_db", "exact-af": "p_u_db", "approx": "p_u_db",
                 "scaling": "M", "allocate": "M"}


def _add_system(p):
    g = p.add_argument_group("system")
    g.add_argument("--M", type=int, help="relay antennas")
    g.add_argument("--N", type=int, help="user pairs")
    g.add_argument("--tau-c", dest="tau_c", type=int, help="coherence interval (default 196)")
    g.add_argument("--tau-p", dest="tau_p", type=int, help="pilot length (default 2N)")
    g.add_argument("--beta-ar", dest="beta_AR", help="A-to-relay fading, one value or N comma-separated")
    g.add_argument("--beta-rb", dest="beta_RB", help="relay-to-B fading, one value or N comma-separated")


def _add_powers(p, budget=False):
    g = p.add_argument_group("powers (dB)")
    g.add_argument("--pu-db", dest="p_u_db", type=float, help="user power")
    g.add_argument("--pr-db", dest="p_r_db", type=float, help="relay power")
    g.add_argument("--pp-db", dest="p_p_db", type=float, help="pilot power")
    g.add_argument("--relay-rule", dest="relay_rule", choices=("fixed", "per-user"),
                   help="per-user sets p_r = 2N p_u")
    g.add_argument("--pilot-rule", dest="pilot_rule", choices=("fixed", "user"),
                   help="user sets p_p = p_u")
    if budget:
        g.add_argument("--P-db", dest="P_db", type=float, help="total power budget")


def _add_scaling(p):
    g = p.add_argument_group("power scaling (p = E / M^exponent)")
    g.add_argument("--scenario", choices=[s.value for s in Scenario])
    g.add_argument("--alpha", help="user power exponent (fractions like 1/2 allowed)")
    g.add_argument("--beta-exp", dest="beta_exp", help="relay power exponent")
    g.add_argument("--gamma", help="pilot power exponent")
    g.add_argument("--Eu-db", dest="E_u_db", type=float)
    g.add_argument("--Er-db", dest="E_r_db", type=float)
    g.add_argument("--Ep-db", dest="E_p_db", type=float)


def _add_sweep(p, kind):
    g = p.add_argument_group("sweep")
    g.add_argument("--sweep", choices=SWEEPS[kind], help=f"default {DEFAULT_SWEEP[kind]}")
    g.add_argument("--grid", help="comma list, or start:stop:step")
    g.add_argument("--outputs", help=f"comma list from {', '.join(OUTPUTS[kind])}")


def _add_global(p, default):
    p.add_argument("--seed", type=int, default=default, help="Monte Carlo seed (default 0)")
    p.add_argument("--trials", type=int, default=default,
                   help="Monte Carlo trials (default 10000)")
    p.add_argument("--out", default=default,
                   help="CSV file, or directory for reproduce (default stdout)")
    p.add_argument("--config", default=default,
                   help="INI file with [system] [powers] [scaling] [sweep] [run]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoway-relay", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    _add_global(parser, None)
    # the global flags are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    _add_global(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_parser = sub.add_parser
    sub.add_parser = lambda *a, **kw: _add_parser(*a, parents=[common], allow_abbrev=False, **kw)

    for kind, helptext in [("stats", "channel estimate variances"),
                           ("mc", "Monte Carlo sum SE for AF and DF"),
                           ("exact-af", "exact AF sum SE"),
                           ("approx", "large-M AF and DF sum SE")]:
        p = sub.add_parser(kind, help=helptext)
        _add_system(p)
        _add_powers(p)
        _add_sweep(p, kind)
        if kind == "exact-af":
            p.add_argument("--form", dest="af_form", choices=("derived", "printed"))
        if kind in ("mc", "approx"):
            p.add_argument("--pairing", choices=("theorem", "printed"))

    p = sub.add_parser("scaling", help="scaled and asymptotic sum SE against M")
    _add_system(p)
    _add_scaling(p)
    _add_sweep(p, "scaling")

    p = sub.add_parser("classify", help="regime and limit of a power scaling law")
    _add_system(p)
    _add_scaling(p)

    p = sub.add_parser("allocate", help="optimised versus uniform power split")
    _add_system(p)
    _add_powers(p, budget=True)
    _add_sweep(p, "allocate")
    p.add_argument("--pairing", choices=("theorem", "printed"))

    p = sub.add_parser("reproduce", help="run a figure preset")
    p.add_argument("preset", choices=PRESETS)
    return parser


# ---------------------------------------------------------------------------
# option resolution


def read_config(path: str) -> dict:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(path, f"cannot read config: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(path, str(exc).splitlines()[0]) from None
    by_section = {}
    for name, (section, _) in FIELDS.items():
        by_section.setdefault(section, set()).add(name)
    out = {}
    for section in cp.sections():
        if section not in by_section:
            raise ConfigError(f"{path} [{section}]", "unknown section")
        for key, raw in cp.items(section):
            if key not in by_section[section]:
                raise ConfigError(f"{path} [{section}] {key}", "unknown key")
            conv = FIELDS[key][1]
            try:
                out[key] = conv(raw)
            except ValueError:
                raise ConfigError(f"{path} [{section}] {key}",
                                  f"expected {conv.__name__}, got {raw!r}") from None
    return out


def _resolve(args: argparse.Namespace) -> dict:
    values = read_config(args.config) if args.config else {}
    for name in FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return values


def parse_grid(text: str, where: str = "grid") -> tuple[float, ...]:
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            start, stop, step = parts
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(start + k * step) for k in range(max(n, 0)))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(where, f"cannot parse {text!r}; use a,b,c or start:stop:step") from None


def _floats(text: str, where: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in str(text).split(","))
    except ValueError:
        raise ConfigError(where, f"expected comma-separated numbers, got {text!r}") from None


def _exponent(text, where):
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(where, f"expected a number or fraction, got {text!r}") from None


def scaling_spec(v: dict) -> ScalingSpec:
    if "scenario" not in v:
        raise ConfigError("scenario", "required (A, B or C)")
    try:
        return ScalingSpec(Scenario(v["scenario"]),
                           alpha=_exponent(v.get("alpha", 0), "alpha"),
                           beta_exp=_exponent(v.get("beta_exp", 0), "beta_exp"),
                           gamma=_exponent(v.get("gamma", 0), "gamma"),
                           E_u=db_to_linear(v.get("E_u_db", 0.0)),
                           E_r=db_to_linear(v.get("E_r_db", 0.0)),
                           E_p=db_to_linear(v.get("E_p_db", 0.0)))
    except ValueError as exc:
        raise ConfigError("scaling", str(exc)) from None


def experiment_config(kind: str, v: dict) -> ExperimentConfig:
    sweep = v.get("sweep", DEFAULT_SWEEP[kind])
    if "grid" in v:
        grid = parse_grid(v["grid"])
    elif sweep in ("M", "N"):
        grid = (float(v.get(sweep, 128 if sweep == "M" else 5)),)
    else:
        grid = (float(v.get(sweep, 10.0 if sweep in ("p_r_db", "P_db") else 0.0)),)
    kw = {k: v[k] for k in ("M", "N", "tau_c", "tau_p", "p_u_db", "p_r_db", "p_p_db",
                            "relay_rule", "pilot_rule", "P_db", "seed", "trials",
                            "af_form", "pairing") if k in v}
    for name in ("beta_AR", "beta_RB"):
        if name in v:
            kw[name] = _floats(v[name], name)
    if "outputs" in v:
        kw["outputs"] = tuple(o.strip() for o in v["outputs"].split(",") if o.strip())
    if kind == "scaling":
        kw["scaling"] = scaling_spec(v)
    cfg = ExperimentConfig(kind, sweep, grid, **kw)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# commands


def _write(table: Table, out: str | None, stdout) -> None:
    if out:
        emit_csv(table, out)
    else:
        stdout.write(render_csv(table))


def _classify(v: dict, stdout) -> int:
    spec = scaling_spec(v)
    N = int(v.get("N", 5))
    tau_p = int(v.get("tau_p", 2 * N))
    cfg = SystemConfig(M=int(v.get("M", 128)), N=N, tau_c=int(v.get("tau_c", 196)), tau_p=tau_p)

    def vec(name):
        b = _floats(v.get(name, "1"), name)
        return np.full(N, b[0]) if len(b) == 1 else np.asarray(b)
    fading = FadingProfile(vec("beta_AR"), vec("beta_RB"))
    stdout.write("protocol,regime,limit\n")
    for proto in ("AF", "DF"):
        reg = scaling.asymptotic_limit(proto, spec, cfg, fading)
        lim = "" if reg.limit_value is None else format(reg.limit_value, ".12g")
        stdout.write(f"{proto},{reg.kind.value},{lim}\n")
    return EXIT_OK


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        v = _resolve(args)
        if args.command == "reproduce":
            tables = reproduce_preset(args.preset, trials=v.get("trials", 10_000),
                                      seed=v.get("seed", 0))
            out_dir = Path(v["out"]) if "out" in v else None
            for t in tables:
                if out_dir is None:
                    stdout.write(f"## {t.name}\n{render_csv(t)}")
                else:
                    emit_csv(t, out_dir / f"{t.name}.csv")
            return EXIT_SOLVER if any(t.failures for t in tables) else EXIT_OK
        if args.command == "classify":
            return _classify(v, stdout)
        cfg = experiment_config(args.command, v)
        table = run_experiment(cfg, args.command)
        _write(table, v.get("out"), stdout)
        if table.failures:
            stderr.write(f"error: solver failed on {table.failures} grid point(s)\n")
            return EXIT_SOLVER
        return EXIT_OK
    except ConfigError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except GpError as exc:
        stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
