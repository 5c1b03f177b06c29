"""Command-line entry point: ``lossyqfi <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .io import load_config, save_pulse, write_table
from .scan import FAMILIES, SCAN_KINDS, ScanRequest, run_engineer, run_scan

# flag dest -> request field
FLAG_FIELDS = {
    "seed": "seed", "workers": "workers", "family": "family", "pa": "pa", "pb": "pb",
    "nmin": "n_min", "nmax": "n_max", "nstep": "n_step", "n": "n",
    "pmin": "p_min", "pmax": "p_max", "pstep": "p_step", "fom": "fom",
    "cutoff": "tail_mass_cutoff", "twist_grid": "twist_grid",
    "twist_objective": "twist_objective", "timing": "timing",
    "m": "m", "dt": "dt", "restarts": "restarts", "max_iter": "max_iter", "tol": "tol",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat TOML file of request keys")
    common.add_argument("--out", type=Path, help="output table (default: stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--family", choices=FAMILIES)
    common.add_argument("--pa", type=float, help="loss probability of mode a")
    common.add_argument("--pb", type=float, help="loss probability of mode b")
    common.add_argument("--nmin", type=int)
    common.add_argument("--nmax", type=int)
    common.add_argument("--nstep", type=int)
    common.add_argument("--n", type=int, help="atom number for fixed-N subcommands")
    common.add_argument("--pmin", type=float)
    common.add_argument("--pmax", type=float)
    common.add_argument("--pstep", type=float)
    common.add_argument("--fom", help="comma list from f1,f2,bounds")
    common.add_argument("--cutoff", type=float, help="binomial tail mass cutoff")
    common.add_argument("--twist-grid", type=int)
    common.add_argument("--twist-objective", choices=("qfi", "f2"))
    common.add_argument("--no-timing", dest="timing", action="store_false", default=None,
                        help="leave wall_time blank so reruns are byte-identical")
    common.add_argument("--m", type=int, help="control segments")
    common.add_argument("--dt", type=float, help="segment duration")
    common.add_argument("--restarts", type=int)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--pulse", type=Path, help="engineer: where to write the pulse file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lossyqfi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "scan-n": "figures of merit versus atom number",
        "scan-p": "figures of merit versus loss probability of mode a",
        "bounds": "noisy SQL / noisy HL / N^1.5 bound versus loss probability",
        "engineer": "optimize piecewise-constant controls for a target state",
        "state-report": "amplitudes and figures of merit of one state",
    }
    for name in SCAN_KINDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_request(args: argparse.Namespace) -> ScanRequest:
    """Defaults < config file < command-line flags."""
    values = {"scan_kind": args.command}
    if args.config is not None:
        values.update(load_config(args.config))
        values["scan_kind"] = args.command
    for dest, name in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            values[name] = value
    return ScanRequest.from_mapping(values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        request = resolve_request(args)
    except (ValueError, TypeError, OSError) as exc:
        print(f"lossyqfi: invalid request: {exc}", file=sys.stderr)
        return 2

    extra = {}
    if request.scan_kind == "engineer":
        from .scan import ENGINEER_COLUMNS

        row, (result, target) = run_engineer(request)
        columns, rows = ENGINEER_COLUMNS, [row]
        pulse_path = args.pulse or (args.out.with_suffix(".pulse.json") if args.out else None)
        if result is not None and pulse_path is not None:
            save_pulse(pulse_path, result, target, request.header())
            extra["pulse_file"] = str(pulse_path)
    else:
        columns, rows, extra = run_scan(request)

    header = {**request.header(), **extra}
    if args.out is None:
        write_table(sys.stdout, header, columns, rows)
    else:
        with open(args.out, "w", newline="") as fh:
            write_table(fh, header, columns, rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
