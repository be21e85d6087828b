"""Command-line front end.

Subcommands: ``simulate``, ``region``, ``scaling``, ``compare`` and
``protocol-dump``.  Every option can also be set in an INI file passed with
``--config``; keys are the long option names (dashes or underscores) in a
``[run]`` section, and flags given on the command line win.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import sweeps
from .errors import CapacityError, DegeneracyError, InvalidInputError, IsingQCError
from .exact import dump_csv
from .model import SpinSystem
from .protocol import generate_protocol

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_CAPACITY = 3
EXIT_DEGENERATE = 4

# option name -> (type, default); shared by the parser and the config loader
OPTIONS = {
    "engine": (str, "estimator"),
    "L": (int, None),
    "omega": (float, None),
    "delta_omega": (float, None),
    "k": (int, None),
    "threshold": (float, sweeps.DEFAULT_THRESHOLD),
    "out": (str, None),
    "omega0": (float, sweeps.DEFAULT_OMEGA0),
    "floor": (float, 1e-14),
    "workers": (int, 1),
    "omega_range": (str, None),
    "delta_omega_range": (str, None),
    "log_delta_omega": (bool, False),
    "L_list": (str, None),
    "max_length_at": (float, None),
    "boundary": (str, "estimator"),
    "side": (str, "both"),
    "path_file": (str, None),
    "engines": (str, "exact,estimator,improved"),
    "format": (str, "table"),
}


def fmt(x) -> str:
    """12 significant digits for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def write_rows(rows: Sequence[dict], out: Optional[str], columns: Optional[List[str]] = None):
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c, "")) for c in columns])
    _emit(buf.getvalue(), out)


def _emit(text: str, out: Optional[str]):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def parse_range(text: str, name: str):
    """'start:stop:count' or 'start,stop,count' -> (float, float, int)."""
    parts = text.replace(",", ":").split(":")
    if len(parts) != 3:
        raise InvalidInputError(f"{name} must look like start:stop:count, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InvalidInputError(f"bad {name} {text!r}: {exc}") from None


def parse_L_list(text: str) -> List[int]:
    """Comma list with optional ranges: '10,20,50-100:10'."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            span, _, step = part.partition(":")
            lo, hi = span.split("-")
            out.extend(range(int(lo), int(hi) + 1, int(step or 1)))
        else:
            out.append(int(part))
    if not out:
        raise InvalidInputError("empty L list")
    return out


def load_config(path: str) -> Dict[str, object]:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise InvalidInputError(f"cannot read config file {path!r}")
    section = parser["run"] if parser.has_section("run") else parser.defaults()
    values = {}
    for raw_key, raw in section.items():
        key = raw_key.replace("-", "_")
        if key not in OPTIONS:
            raise InvalidInputError(f"unknown config key {raw_key!r} in {path}")
        typ = OPTIONS[key][0]
        try:
            if typ is bool:
                values[key] = section.getboolean(raw_key)
            else:
                values[key] = typ(raw)
        except ValueError as exc:
            raise InvalidInputError(f"config key {raw_key!r}: {exc}") from None
    return values


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge defaults < config file < command-line flags."""
    config = load_config(args.config) if args.config else {}
    for key, (_, default) in OPTIONS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, default))
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise InvalidInputError(f"missing required option(s): {flags}")


# -- subcommands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    _require(args, "L", "delta_omega")
    if args.omega is None and args.k is None:
        raise InvalidInputError("give --omega or --k")
    res, state = sweeps.run_point(args.engine, args.L, args.delta_omega, args.omega, args.k,
                                  omega0=args.omega0, truncation_floor=args.floor, return_state=True)
    report = {k: (None if isinstance(v, float) and math.isnan(v) else v)
              for k, v in sweeps.point_dict(res).items()}
    if args.engine == "estimator":
        report["budget"] = state.to_dict()
    else:
        report["support"] = len(state)
        if args.out:
            dump_csv(state, args.out)
            report["amplitudes_csv"] = args.out
    print(json.dumps(report, indent=2, default=float))
    return EXIT_OK


def cmd_region(args) -> int:
    _require(args, "L", "omega_range", "delta_omega_range")
    spec = sweeps.SweepSpec(
        L=args.L, engine=args.engine,
        omega_grid=parse_range(args.omega_range, "--omega-range"),
        delta_omega_grid=parse_range(args.delta_omega_range, "--delta-omega-range"),
        threshold=args.threshold, k_2pik=args.k, omega0=args.omega0,
        truncation_floor=args.floor, log_delta_omega=bool(args.log_delta_omega), out=args.out)
    rows = sweeps.region_diagram(spec, workers=args.workers)
    write_rows(rows, args.out, ["delta_omega", "omega", "P", "below_threshold", "error"])
    return EXIT_OK


def cmd_scaling(args) -> int:
    _require(args, "k")
    if args.max_length_at is not None:
        L_max = sweeps.max_chain_length(args.k, args.max_length_at, args.threshold, args.omega0)
        write_rows([{"k": args.k, "delta_omega": args.max_length_at, "threshold": args.threshold,
                     "L_max": L_max}], args.out)
        return EXIT_OK
    _require(args, "L_list")
    rows = sweeps.scaling_curve(parse_L_list(args.L_list), args.k, args.threshold,
                                workers=args.workers, omega0=args.omega0)
    write_rows(rows, args.out, ["L", "delta_omega_min", "error"])
    return EXIT_OK


def _read_path(path: str):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        try:
            return [(float(r["delta_omega"]), float(r["omega"])) for r in reader]
        except (KeyError, ValueError) as exc:
            raise InvalidInputError(f"path file needs delta_omega and omega columns ({exc})") from None


def cmd_compare(args) -> int:
    _require(args, "L")
    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    if args.path_file:
        path = _read_path(args.path_file)
    else:
        _require(args, "k", "delta_omega_range")
        lo, hi, n = parse_range(args.delta_omega_range, "--delta-omega-range")
        dws = np.geomspace(lo, hi, n) if args.log_delta_omega else np.linspace(lo, hi, n)
        sides = ("upper", "lower") if args.side == "both" else (args.side,)
        path = []
        for side in sides:
            path += sweeps.trace_boundary(args.boundary, args.L, args.k, dws, side, args.threshold,
                                          workers=args.workers, omega0=args.omega0,
                                          truncation_floor=args.floor)
    rows = sweeps.compare_engines(args.L, path, engines, omega0=args.omega0,
                                  truncation_floor=args.floor, workers=args.workers)
    write_rows(rows, args.out)
    return EXIT_OK


def cmd_protocol_dump(args) -> int:
    _require(args, "L", "delta_omega")
    if args.omega is None and args.k is None:
        raise InvalidInputError("give --omega or --k")
    plan = generate_protocol(SpinSystem(args.L, args.delta_omega, omega0=args.omega0), args.omega, args.k)
    text = plan.to_json(indent=2) + "\n" if args.format == "json" else plan.table() + "\n"
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "region": cmd_region,
    "scaling": cmd_scaling,
    "compare": cmd_compare,
    "protocol-dump": cmd_protocol_dump,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [run] section of option values")
    common.add_argument("--engine", choices=sweeps.ENGINES)
    common.add_argument("--L", type=int, help="chain length")
    common.add_argument("--omega", type=float, help="Rabi frequency (units of J)")
    common.add_argument("--delta-omega", dest="delta_omega", type=float,
                        help="Larmor spacing between neighbours (units of J)")
    common.add_argument("--k", type=int, help="2*pi*k index; sets Omega = 2J / sqrt(4k^2 - 1)")
    common.add_argument("--threshold", type=float, help="error threshold P0 (default 1e-5)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--omega0", type=float, help="Larmor frequency of spin 0 (default 100)")
    common.add_argument("--floor", type=float, help="truncation floor of the improved engine")
    common.add_argument("--workers", type=int, help="worker processes for sweeps (default 1)")

    parser = argparse.ArgumentParser(prog="isingqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="run the entanglement protocol once")

    p = sub.add_parser("region", parents=[common], help="P on a (delta_omega, Omega) grid")
    p.add_argument("--omega-range", dest="omega_range", help="start:stop:count")
    p.add_argument("--delta-omega-range", dest="delta_omega_range", help="start:stop:count")
    p.add_argument("--log-delta-omega", dest="log_delta_omega", action="store_true", default=None)

    p = sub.add_parser("scaling", parents=[common], help="delta_omega_min(L) from the estimator")
    p.add_argument("--L-list", dest="L_list", help="e.g. 10,20,50-200:25")
    p.add_argument("--max-length-at", dest="max_length_at", type=float,
                   help="instead report the largest feasible L at this delta_omega")

    p = sub.add_parser("compare", parents=[common], help="engines side by side along a path")
    p.add_argument("--path-file", dest="path_file", help="CSV with delta_omega, omega columns")
    p.add_argument("--boundary", choices=("estimator", "improved"),
                   help="trace this engine's P = threshold boundary as the path")
    p.add_argument("--side", choices=("upper", "lower", "both"))
    p.add_argument("--delta-omega-range", dest="delta_omega_range", help="start:stop:count")
    p.add_argument("--log-delta-omega", dest="log_delta_omega", action="store_true", default=None)
    p.add_argument("--engines", help="comma list (default exact,estimator,improved)")

    p = sub.add_parser("protocol-dump", parents=[common], help="print the pulse schedule")
    p.add_argument("--format", choices=("table", "json"))
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, CapacityError):
        return EXIT_CAPACITY
    if isinstance(exc, DegeneracyError):
        return EXIT_DEGENERATE
    if isinstance(exc, (InvalidInputError, ValueError)):
        return EXIT_INVALID
    return EXIT_FAILURE


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    try:
        resolve(args)
        return COMMANDS[args.command](args)
    except (IsingQCError, ValueError, OSError) as exc:
        report = {"status": "error", "command": args.command, "error": type(exc).__name__,
                  "message": str(exc)}
        if isinstance(exc, DegeneracyError):
            report["denominator"] = exc.denominator
        sys.stderr.write(json.dumps(report) + "\n")
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
