"""Command-line front end.

Exit codes: 0 success, 1 invalid input or usage, 2 engine or numerical
failure, 3 file-system failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .scenario import (
    PRESET_NAMES,
    ScenarioError,
    SweepError,
    SweepSpec,
    load_scenario,
    preset,
    run_scenario,
    run_sweep,
    serialize_scenario,
)
from .output import write_text_atomic
from .states import InvalidStateError

EXIT_OK, EXIT_INVALID, EXIT_ENGINE, EXIT_IO = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which is reserved for engine errors here
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _emit_list(text: str) -> tuple[str, ...]:
    kinds = tuple(k.strip() for k in text.split(",") if k.strip())
    bad = set(kinds) - {"csv", "svg"}
    if bad:
        raise argparse.ArgumentTypeError(f"unknown emit kind(s): {', '.join(sorted(bad))}")
    return kinds


def _values(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot read values {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qnnres", description="Collision-model runs of a star-topology qubit network.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--emit", type=_emit_list, default=("csv",), help="comma list of csv, svg")

    pre = sub.add_parser("preset", help="run a built-in preset")
    pre.add_argument("--name", required=True)
    pre.add_argument("--out", required=True)
    pre.add_argument("--emit", type=_emit_list, default=("csv",))

    sw = sub.add_parser("sweep", help="sweep one parameter of a scenario")
    src = sw.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario")
    src.add_argument("--preset")
    sw.add_argument("--param", required=True)
    sw.add_argument("--values", type=_values, required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--reduce", default="", help="comma list of tracked metrics to collect")
    sw.add_argument("--workers", type=int, default=1)

    sub.add_parser("list-presets", help="print the preset names")

    val = sub.add_parser("validate", help="check a scenario file without running it")
    val.add_argument("--scenario", required=True)
    return p


def _report_line(report) -> str:
    s = report.steady
    status = f"steady at step {s.steady_step}" if s.converged else "not converged"
    return f"{report.scenario}: {status}; wrote {len(report.files)} file(s)"


def _dispatch(args) -> int:
    if args.command == "list-presets":
        print("\n".join(PRESET_NAMES))
        return EXIT_OK
    if args.command == "validate":
        cfg = load_scenario(args.scenario)
        print(f"{args.scenario}: ok ({cfg.mode}, {cfg.topology.n_inputs} input(s), {len(cfg.reservoirs)} reservoir(s))")
        return EXIT_OK
    if args.command == "run":
        report = run_scenario(load_scenario(args.scenario), args.out, emit=args.emit)
        print(_report_line(report))
        return EXIT_OK
    if args.command == "preset":
        cfg = preset(args.name)
        report = run_scenario(cfg, args.out, emit=args.emit)
        write_text_atomic(report.files[0].parent / f"{cfg.name}.qnn", serialize_scenario(cfg))
        print(_report_line(report))
        return EXIT_OK
    if args.command == "sweep":
        cfg = load_scenario(args.scenario) if args.scenario else preset(args.preset)
        if args.workers < 1:
            raise ValueError("--workers must be at least 1")
        reduce = tuple(m.strip() for m in args.reduce.split(",") if m.strip())
        report = run_sweep(cfg, SweepSpec(args.param, args.values, reduce), args.out, workers=args.workers)
        failed = sum(not r.ok for r in report.rows)
        print(f"{report.scenario}: swept {report.param} over {len(report.rows)} value(s), {failed} failed")
        for r in report.rows:
            if not r.ok:
                print(f"  {r.value}: {r.error}", file=sys.stderr)
        return EXIT_OK
    raise _UsageError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _dispatch(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidStateError, SweepError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except (ScenarioError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
