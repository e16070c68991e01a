"""Command-line front end.

Every command writes a CSV table whose first line is ``# schema: <name>/<version>``
followed by a header row.  Exit codes: 0 success, 2 usage error (bad flags,
bad config, invalid parameters), 3 numerical failure (quadrature, fit or
reconstruction failed, too few counts).

A scenario config file (``--config``) is an INI document with one section per
command, e.g. ``[chsh-window]``; its keys are the long flag names with
dashes or underscores and provide defaults that explicit flags override.
Unknown sections or keys are rejected.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import calibration, coherence, entanglement, interference, montecarlo, tomography
from ._quadrature import QuadratureError
from .wavepacket import NO_MODULATION, BiphotonWavepacket, ModulationSpec, angular_frequency

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

MODULATIONS = ("none", "triangular", "cosinusoidal", "sinc2")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _grid(text: str) -> np.ndarray:
    """``a,b,c`` (explicit values) or ``start:stop:num`` (inclusive range)."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            num = int(num)
            if num < 1:
                raise ValueError
            return np.linspace(float(start), float(stop), num)
        values = np.array([float(x) for x in text.split(",") if x.strip()])
        if values.size == 0:
            raise ValueError
        return values
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'a,b,c' or 'start:stop:num', got {text!r}") from None


def _log_grid(text: str) -> np.ndarray:
    if ":" not in text:
        return _grid(text)
    lo, hi, num = text.split(":")
    try:
        lo, hi, n = float(lo), float(hi), int(num)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed range {text!r}") from None
    if lo <= 0 or hi <= 0 or n < 1:
        raise argparse.ArgumentTypeError("log ranges need positive bounds")
    return np.geomspace(lo, hi, n)


def _modulation(name: str, terms: int = 100) -> ModulationSpec:
    if name == "none":
        return NO_MODULATION
    if name == "triangular":
        return ModulationSpec.square()
    if name == "cosinusoidal":
        return ModulationSpec.cosinusoidal()
    return ModulationSpec.sinc2(terms)


def _wavepacket(args) -> BiphotonWavepacket:
    return BiphotonWavepacket(args.tau_left, args.tau_right)


def _add_wavepacket(p):
    p.add_argument("--tau-left", type=float, default=21.0, help="decay time for tau < 0 (ns)")
    p.add_argument("--tau-right", type=float, default=24.0, help="decay time for tau > 0 (ns)")


def _add_output(p, required=False):
    p.add_argument("--output", "-o", required=required,
                   help="output file (default: standard output)" if not required else
                   "output directory")


def load_imperfections(path) -> entanglement.ImperfectionModel:
    """Read an imperfection file written by ``fit-imperfections``."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read imperfection file {path}")
    if cp.sections() != ["imperfections"]:
        raise UsageError("imperfection file needs exactly one [imperfections] section")
    sec = dict(cp["imperfections"])
    allowed = {"accidental_rate", "pair_rate", "split_ratio", "basis_error_1", "basis_error_2",
               "accidental_fraction", "reference_window"}
    unknown = set(sec) - allowed
    if unknown:
        raise UsageError(f"unknown imperfection keys: {sorted(unknown)}")
    try:
        return entanglement.ImperfectionModel(
            accidental_rate=float(sec.get("accidental_rate", 0.0)),
            pair_rate=float(sec.get("pair_rate", 1.0)),
            split_ratio=float(sec.get("split_ratio", 0.5)),
            basis_error=(float(sec.get("basis_error_1", 0.0)), float(sec.get("basis_error_2", 0.0))))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _imperfections(args) -> Optional[entanglement.ImperfectionModel]:
    if getattr(args, "imperfections", None):
        return load_imperfections(args.imperfections)
    if getattr(args, "calibrated", False):
        return calibration.reference_calibration().imperfections
    return None


class _Table:
    def __init__(self, name: str, columns: Sequence[str], path: Optional[str]):
        self._fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
        self._fh.write(f"# schema: {name}/{SCHEMA_VERSION}\n")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(columns)

    def row(self, *values):
        self._w.writerow([_fmt(v) for v in values])

    def close(self):
        if self._fh is not sys.stdout:
            self._fh.close()
        else:
            self._fh.flush()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# ---------------------------------------------------------------------------
# commands


def cmd_zeta_sweep(args) -> int:
    thetas = args.theta
    if np.any(thetas < 0):
        raise UsageError("theta must be non-negative")
    fid_mod = _modulation(args.fidelity_of, args.sinc_terms)
    t = _Table("zeta-sweep", ("theta", "zeta_unmod", "zeta_tri", "zeta_cos", "zeta_sinc2", "fidelity"),
               args.output)
    for th in thetas:
        t.row(float(th), coherence.zeta_unmodulated(th), coherence.zeta_triangular(th),
              coherence.zeta_cosinusoidal(th), coherence.zeta_sinc2(th, args.sinc_terms),
              coherence.interference_fidelity(th, fid_mod))
    t.close()
    return EXIT_OK


def cmd_concurrence_vs_frequency(args) -> int:
    imp = _imperfections(args)
    wp = _wavepacket(args)
    mods = [(name, _modulation(name, args.sinc_terms)) for name in MODULATIONS]
    cols = ["freq_mhz", "theta"] + [f"C_ideal_{n}" for n, _ in mods]
    if imp is not None:
        cols += [f"C_cal_{n}" for n, _ in mods] + [f"purity_cal_{n}" for n, _ in mods]
    t = _Table("concurrence-vs-frequency", cols, args.output)
    for mhz in args.freq:
        theta = angular_frequency(mhz) * args.tau0
        row = [float(mhz), theta] + [2.0 * float(coherence.zeta(theta, m)) for _, m in mods]
        if imp is not None:
            states = [calibration.scenario_state(imp, wp, m, angular_frequency(mhz), args.window)
                      for _, m in mods]
            row += [entanglement.concurrence(s) for s in states]
            row += [entanglement.purity(s) for s in states]
        t.row(*row)
    t.close()
    return EXIT_OK


def cmd_chsh_window(args) -> int:
    imp = _imperfections(args) or entanglement.IDEAL
    wp = _wavepacket(args).with_detuning(angular_frequency(args.freq))
    mod = _modulation(args.modulation, args.sinc_terms)
    windows = args.windows
    if np.any(windows <= 0):
        raise UsageError("windows must be positive")
    un = interference.chsh_vs_window(wp, NO_MODULATION, imperfections=imp, windows=windows,
                                     workers=args.workers)
    md = interference.chsh_vs_window(wp, mod, imperfections=imp, windows=windows, workers=args.workers)
    ideal = interference.chsh_vs_window(wp, mod, windows=windows, workers=args.workers)
    t = _Table("chsh-window", ("window", "S_unmodulated", "S_modulated", "S_ideal"), args.output)
    for row in zip(windows, un.s_values, md.s_values, ideal.s_values):
        t.row(*(float(x) for x in row))
    t.close()
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    wp = _wavepacket(args).with_detuning(angular_frequency(args.freq))
    mod = _modulation(args.modulation, args.sinc_terms)
    if mod.kind.value == "sinc2":
        raise UsageError("the event simulation supports none, triangular and cosinusoidal modulation")
    imp = _imperfections(args)
    split = imp.split_ratio if imp is not None else args.split_ratio
    basis = imp.basis_error if imp is not None else (0.0, 0.0)
    background = args.accidental_rate
    if background is None:
        # the model's coincidence rate r1*r2 scales with its pair rate
        background = 0.0 if imp is None else math.sqrt(imp.accidental_rate * args.pair_rate / imp.pair_rate)
    measurements = ["chsh", "tomography"] if args.measure == "both" else [args.measure]
    rows = []
    for name in measurements:
        schedule = (montecarlo.chsh_schedule() if name == "chsh" else montecarlo.tomography_schedule())
        duration = args.pairs / args.pair_rate / len(schedule)
        cfg = montecarlo.RunConfig(pair_rate=args.pair_rate, duration=duration, wavepacket=wp,
                                   modulation=mod, accidental_rate=background,
                                   seed=args.seed, split_ratio=split, basis_error=basis,
                                   substream=(0 if name == "chsh" else 1,))
        streams = montecarlo.simulate_settings(cfg, schedule, args.workers)
        for k, s in enumerate(streams):
            stem = out / f"{name}_{k:02d}"
            if args.format == "binary":
                s.write_binary(stem.with_suffix(".bin"))
            elif args.format == "csv":
                stem.with_suffix(".csv").write_text(s.to_csv())
        counts = montecarlo.coincidence_analysis(streams, args.window, schedule)
        state = montecarlo.analytic_state(cfg, args.window)
        if name == "chsh":
            est = montecarlo.estimate_chsh(counts)
            rows.append((name, "S", est.value, est.stderr,
                         entanglement.chsh_fixed(state, entanglement.CANONICAL_ANGLES, basis)))
        else:
            records = [tomography.CountRecord(s, c.pp, c.total)
                       for s, c in zip(tomography.standard_settings(), counts)]
            if any(c.total == 0 for c in counts):
                raise montecarlo.InsufficientCountsError("a tomography setting has no coincidences")
            for q, fn in (("concurrence", entanglement.concurrence), ("purity", entanglement.purity)):
                b = tomography.bootstrap(records, fn, args.bootstrap, seed=args.seed)
                rows.append((name, q, b.estimate, b.stderr, fn(state)))
            dd = counts[10]  # (D, D)
            rows.append((name, "coherence_re", dd.correlation / 2,
                         math.sqrt((1 - dd.correlation ** 2) / dd.total) / 2, float(state.matrix[1, 2].real)))
    t = _Table("montecarlo", ("measurement", "quantity", "estimate", "stderr", "analytic"),
               str(out / "analysis.csv"))
    for r in rows:
        t.row(*r)
    t.close()
    if args.format != "none":
        digest = hashlib.sha256()
        for f in sorted(out.iterdir()):
            if f.name != "manifest.txt":
                digest.update(f.name.encode() + f.read_bytes())
        (out / "manifest.txt").write_text(f"sha256 {digest.hexdigest()}\n")
    return EXIT_OK


def cmd_fit_imperfections(args) -> int:
    fit = calibration.fit_imperfections(
        args.concurrence, args.purity, purity_nondegenerate=args.purity_nondegenerate,
        nondegenerate_mhz=args.nondegenerate_freq, wp=_wavepacket(args), window=args.window)
    imp = fit.imperfections
    cp = configparser.ConfigParser()
    cp["imperfections"] = {
        "accidental_fraction": repr(fit.epsilon),
        "reference_window": repr(float(args.window)),
        "accidental_rate": repr(imp.accidental_rate),
        "pair_rate": repr(imp.pair_rate),
        "split_ratio": repr(imp.split_ratio),
        "basis_error_1": repr(imp.basis_error[0]),
        "basis_error_2": repr(imp.basis_error[1]),
    }
    if args.output in (None, "-"):
        cp.write(sys.stdout)
    else:
        with open(args.output, "w") as fh:
            cp.write(fh)
    names = ("concurrence", "purity", "purity_nondegenerate")
    for n, a, tg in zip(names, fit.achieved, fit.targets):
        print(f"{n}: target {tg:.4f} achieved {a:.4f}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biphoton", description="Biphoton coherence, entanglement and CHSH calculations.")
    parser.add_argument("--config", help="INI file with per-command defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zeta-sweep", help="coherence of all modulation schemes versus theta")
    p.add_argument("--theta", type=_grid, default=_log_grid("1e-3:1e3:50"),
                   help="theta values: 'a,b,c' or 'start:stop:num' (default log grid 1e-3..1e3)")
    p.add_argument("--log-theta", type=_log_grid, dest="theta_log",
                   help="log-spaced theta range 'start:stop:num'")
    p.add_argument("--sinc-terms", type=int, default=100)
    p.add_argument("--fidelity-of", choices=MODULATIONS, default="none",
                   help="modulation whose interference fidelity fills the last column")
    _add_output(p)
    p.set_defaults(func=cmd_zeta_sweep)

    p = sub.add_parser("concurrence-vs-frequency", help="ideal and calibrated concurrence per detuning")
    p.add_argument("--freq", type=_grid, default=_grid("0:100:21"), help="detunings in MHz")
    p.add_argument("--tau0", type=float, default=22.5, help="symmetric decay time for the ideal columns")
    p.add_argument("--window", type=float, default=calibration.REFERENCE_WINDOW)
    p.add_argument("--sinc-terms", type=int, default=100)
    _add_imperfection_flags(p)
    _add_wavepacket(p)
    _add_output(p)
    p.set_defaults(func=cmd_concurrence_vs_frequency)

    p = sub.add_parser("chsh-window", help="|S| versus coincidence window")
    p.add_argument("--freq", type=float, default=20.0, help="detuning in MHz")
    p.add_argument("--modulation", choices=MODULATIONS[1:], default="triangular")
    p.add_argument("--windows", type=_grid, default=_grid("1:100:100"), help="window half-widths (ns)")
    p.add_argument("--sinc-terms", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    _add_imperfection_flags(p)
    _add_wavepacket(p)
    _add_output(p)
    p.set_defaults(func=cmd_chsh_window)

    p = sub.add_parser("montecarlo", help="event-level simulation with CHSH and tomography analysis")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=10 ** 6, help="expected pairs per measurement")
    p.add_argument("--pair-rate", type=float, default=1e-5, help="pairs per ns")
    p.add_argument("--accidental-rate", type=float,
                   help="background per arm (1/ns); default 0, or matched to the imperfection model")
    p.add_argument("--split-ratio", type=float, default=0.5)
    p.add_argument("--freq", type=float, default=0.0, help="detuning in MHz")
    p.add_argument("--modulation", choices=MODULATIONS[:3], default="none")
    p.add_argument("--sinc-terms", type=int, default=100)
    p.add_argument("--window", type=float, default=100.0)
    p.add_argument("--measure", choices=("chsh", "tomography", "both"), default="both")
    p.add_argument("--format", choices=("binary", "csv", "none"), default="binary",
                   help="event file format")
    p.add_argument("--bootstrap", type=int, default=20, help="bootstrap replicates for tomography errors")
    p.add_argument("--workers", type=int, default=1)
    _add_imperfection_flags(p)
    _add_wavepacket(p)
    _add_output(p, required=True)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("fit-imperfections", help="fit accidentals and split ratio to C/purity targets")
    p.add_argument("--concurrence", type=float, required=True)
    p.add_argument("--purity", type=float, required=True)
    p.add_argument("--purity-nondegenerate", type=float)
    p.add_argument("--nondegenerate-freq", type=float, default=50.0, help="MHz")
    p.add_argument("--window", type=float, default=calibration.REFERENCE_WINDOW)
    _add_wavepacket(p)
    _add_output(p)
    p.set_defaults(func=cmd_fit_imperfections)
    return parser


def _add_imperfection_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--imperfections", help="imperfection file from fit-imperfections")
    g.add_argument("--calibrated", action="store_true",
                   help="use the built-in calibration to the reference tomography numbers")


def _apply_config(parser, argv: List[str]) -> List[str]:
    """Prepend defaults from ``--config`` to the command's own arguments."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    cp = configparser.ConfigParser()
    if not cp.read(known.config):
        raise UsageError(f"cannot read config file {known.config}")
    sub = next((a for a in rest if not a.startswith("-")), None)
    if sub is None:
        return rest
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    unknown_sections = set(cp.sections()) - set(subparsers.choices)
    if unknown_sections:
        raise UsageError(f"unknown config sections: {sorted(unknown_sections)}")
    if sub not in cp:
        return rest
    cmd = subparsers.choices[sub]
    flags = {}
    for action in cmd._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                flags[opt[2:].replace("-", "_")] = (opt, action)
    extra = []
    for key, value in cp[sub].items():
        k = key.replace("-", "_")
        if k not in flags or k == "help":
            raise UsageError(f"unknown config key {key!r} in [{sub}]")
        opt, action = flags[k]
        if isinstance(action, argparse._StoreTrueAction):
            if value.strip().lower() in ("1", "true", "yes", "on"):
                extra.append(opt)
        else:
            extra += [opt, value]
    i = rest.index(sub)
    # config values first so explicit flags win
    return rest[:i + 1] + extra + rest[i + 1:]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"biphoton: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "theta_log", None) is not None:
        args.theta = args.theta_log
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, (calibration.InfeasibleTargetsError, montecarlo.InsufficientCountsError)):
            print(f"biphoton: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"biphoton: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"biphoton: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
