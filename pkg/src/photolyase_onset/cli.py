"""Command-line front end.

    photolyase-onset simulate  --config run.cfg --out traj.csv
    photolyase-onset budget    --config run.cfg
    photolyase-onset assay     --config run.cfg --seed 7 --out data.csv
    photolyase-onset retrodict --config run.cfg --input data.csv

Exit status: 0 success, 2 configuration error, 3 data error, 4 fit failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import kinetics
from .assay import AssayProtocol, run_assay, schedule_withdrawals
from .errors import EstimationError, InputError, ParameterDomainError
from .formats import (
    ConfigError,
    measurements_csv,
    parse_config,
    read_measurements,
    report_lines,
    trajectory_csv,
    write_atomic,
)
from .kinetics import ReactionParams
from .photon_budget import OpticalParams, PhotonBudgetInput, conversion_fraction
from .retrodict import retrodict

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_FIT = 0, 2, 3, 4

REQUIRED = object()


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


_REACTION = {
    "p0": (float, 1e-12),
    "s0": (float, 1e-10),
    "k": (float, 1.4e6),
    "t0": (float, 0.0),
}

SCHEMAS = {
    "simulate": {
        **_REACTION,
        "model": (str, "second_exact"),
        "t_start": (float, None),
        "t_end": (float, None),
        "horizon_halflives": (float, 5.0),
        "n_points": (int, 101),
        "rel_tol": (float, 1e-8),
    },
    "budget": {
        "epsilon": (float, 1e5),
        "path_length": (float, 10.0),
        "dna_concentration": (float, 1e-10),
        "c_m": (float, None),
        "volume": (float, 1e-4),
        "quantum_yield": (float, 0.015),
        "gamma_count": (float, 1e9),
        "uv_multiplication": (float, 1e6),
        "sites_per_molecule": (float, 1.0),
    },
    "assay": {
        **_REACTION,
        "model": (str, "pseudo_first"),
        "counts_per_molar": (float, REQUIRED),
        "n_withdrawals": (int, 10),
        "horizon_halflives": (float, 3.0),
        "withdrawal_times": (_floats, None),
        "gel_delay": (_floats, [0.0]),
        "seed": (int, 0),
    },
    "retrodict": {
        "p0": (float, 1e-12),
        "estimator": (str, "pseudo_first"),
        "s0": (float, None),
        "confidence": (float, 0.95),
        "n_resamples": (int, 1000),
        "seed": (int, 0),
        "weights": (str, "none"),
        "counts_per_molar": (float, None),
    },
}

CHOICES = {
    ("simulate", "model"): ("pseudo_first", "second_exact", "ode"),
    ("assay", "model"): ("pseudo_first", "second_exact"),
    ("retrodict", "estimator"): ("pseudo_first", "second_order"),
    ("retrodict", "weights"): ("none", "poisson"),
}

ALL_KEYS = frozenset(key for schema in SCHEMAS.values() for key in schema)


@dataclass(frozen=True)
class RunConfig:
    """Typed settings for one subcommand.

    Keys that belong only to other subcommands are ignored so a single
    file can drive a whole pipeline; keys unknown to every subcommand
    are rejected.
    """

    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_text(cls, command, text, seed=None):
        raw = parse_config(text)
        schema = SCHEMAS[command]
        for key in raw:
            if key not in ALL_KEYS:
                raise ConfigError(key, "unknown key")
        values = {}
        for key, (conv, default) in schema.items():
            if key in raw:
                try:
                    value = conv(raw[key])
                except ValueError:
                    raise ConfigError(key, f"cannot parse {raw[key]!r}") from None
                if isinstance(value, float) and not math.isfinite(value):
                    raise ConfigError(key, f"must be finite, got {raw[key]!r}")
            elif default is REQUIRED:
                raise ConfigError(key, f"required by '{command}' but missing")
            else:
                value = default
            choices = CHOICES.get((command, key))
            if choices and value not in choices:
                raise ConfigError(key, f"must be one of {', '.join(choices)}, got {value!r}")
            values[key] = value
        if seed is not None:
            values["seed"] = seed
        if "seed" in values and values["seed"] < 0:
            raise ConfigError("seed", "must be unsigned")
        return cls(command, values)


def _reaction(cfg):
    try:
        return ReactionParams(cfg["p0"], cfg["s0"], cfg["k"], cfg["t0"])
    except ParameterDomainError as exc:
        raise ConfigError(str(exc).split()[0], str(exc)) from None


def cmd_simulate(cfg: RunConfig) -> str:
    params = _reaction(cfg)
    n = cfg["n_points"]
    if n < 1:
        raise ConfigError("n_points", "time grid is empty")
    t_start = params.t0 if cfg["t_start"] is None else cfg["t_start"]
    t_end = cfg["t_end"]
    if t_end is None:
        t_end = params.t0 + cfg["horizon_halflives"] * kinetics.half_life_pseudo_first(params.s0, params.k)
    if n > 1 and not t_end > t_start:
        raise ConfigError("t_end", f"must exceed t_start ({t_start!r})")
    grid = np.linspace(t_start, t_end, n).tolist()
    if cfg["model"] == "ode":
        try:
            samples = kinetics.integrate_ode(params, grid, cfg["rel_tol"])
        except InputError as exc:
            raise ConfigError("rel_tol", str(exc)) from None
    else:
        samples = kinetics.trajectory(params, grid, cfg["model"])
    return trajectory_csv(samples)


def cmd_budget(cfg: RunConfig) -> str:
    c_m = cfg["dna_concentration"] if cfg["c_m"] is None else cfg["c_m"]
    try:
        optics = OpticalParams(cfg["epsilon"], c_m, cfg["path_length"])
        inp = PhotonBudgetInput(
            optics=optics,
            gamma_count=cfg["gamma_count"],
            dna_concentration=cfg["dna_concentration"],
            volume=cfg["volume"],
            quantum_yield=cfg["quantum_yield"],
            uv_multiplication=cfg["uv_multiplication"],
            sites_per_molecule=cfg["sites_per_molecule"],
        )
        report = conversion_fraction(inp)
    except ParameterDomainError as exc:
        raise ConfigError(str(exc).split()[0], str(exc)) from None
    text = [
        "photon budget",
        f"  absorbance (decadic)    {report.absorbance:.6g}",
        f"  fraction absorbed       {report.fraction_absorbed:.5e} ({100 * report.fraction_absorbed:.4f} %)",
        f"  uv photons in pulse     {report.uv_photons:.4e}",
        f"  dimer sites             {report.total_sites:.4e}",
        f"  photons for all sites   {report.required_photons:.4e}",
        f"  conversion fraction     {report.conversion_fraction:.4f}",
        "",
    ]
    return "\n".join(text) + report_lines(report.as_dict())


def cmd_assay(cfg: RunConfig) -> str:
    params = _reaction(cfg)
    try:
        times = cfg["withdrawal_times"]
        if times is None:
            times = schedule_withdrawals(params, cfg["n_withdrawals"], cfg["horizon_halflives"])
        delay = cfg["gel_delay"]
        protocol = AssayProtocol(
            params=params,
            withdrawal_times=tuple(times),
            counts_per_molar=cfg["counts_per_molar"],
            seed=cfg["seed"],
            gel_delay=delay[0] if len(delay) == 1 else tuple(delay),
        )
    except (InputError, ParameterDomainError) as exc:
        raise ConfigError("assay", str(exc)) from None
    return measurements_csv(run_assay(protocol, cfg["model"]))


def cmd_retrodict(cfg: RunConfig, csv_text: str) -> str:
    p0 = cfg["p0"]
    if not p0 > 0:
        raise ConfigError("p0", "must be positive")
    if not 0 < cfg["confidence"] < 1:
        raise ConfigError("confidence", "must lie in (0, 1)")
    n_boot = cfg["n_resamples"]
    if n_boot != 0 and n_boot < 100:
        raise ConfigError("n_resamples", "must be 0 (no bootstrap) or at least 100")
    s0 = cfg["s0"] if cfg["estimator"] == "second_order" else None
    measurements = read_measurements(csv_text, p0)
    result, ci = retrodict(
        measurements,
        p0,
        model=cfg["estimator"],
        s0=s0,
        confidence=cfg["confidence"],
        n_resamples=n_boot,
        seed=cfg["seed"],
        weights=cfg["weights"],
        counts_per_molar=cfg["counts_per_molar"],
    )
    values = result.as_dict()
    values["ci_method"] = "bootstrap" if n_boot else "linearized"
    values["n_resamples"] = n_boot
    values["seed"] = cfg["seed"]
    for name, (lo, hi) in ci.items():
        if name != "t0":
            values[f"ci_{name}_low"] = lo
            values[f"ci_{name}_high"] = hi
    return report_lines(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photolyase-onset",
        description="Photolyase binding kinetics, photon budget and onset-time retrodiction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "write a binding trajectory as CSV",
        "budget": "photon budget report",
        "assay": "simulate aliquot/gel counting measurements as CSV",
        "retrodict": "estimate the onset time from a measurement CSV",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", help="output path (default: stdout)")
        if name == "retrodict":
            p.add_argument("--input", required=True, help="measurement CSV from 'assay'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        cfg = RunConfig.from_text(args.command, text, seed=args.seed)
        if args.command == "retrodict":
            try:
                with open(args.input) as fh:
                    csv_text = fh.read()
            except OSError as exc:
                print(f"error: cannot read input: {exc}", file=sys.stderr)
                return EXIT_DATA
            output = cmd_retrodict(cfg, csv_text)
        else:
            output = {"simulate": cmd_simulate, "budget": cmd_budget, "assay": cmd_assay}[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EstimationError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (InputError, ParameterDomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    if args.out:
        write_atomic(args.out, output)
    else:
        sys.stdout.write(output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
