"""``qalleles`` command line: run, sweep, check, presets.

Exit codes: 0 success, 2 configuration or expression error, 3 numerical
failure, 4 sweep finished with at least one failed pair.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import (ConfigError, DomainError, EvalError, ExprSyntaxError,
                      SingularityError, StabilityError, StateError)
from .config import load
from .presets import DESCRIPTIONS, PRESETS
from .runner import atomic_write, check_hypotheses, run_single, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4

_CONFIG_ERRORS = (ExprSyntaxError, DomainError, EvalError, ConfigError)
_NUMERICAL_ERRORS = (StabilityError, StateError, SingularityError)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--preset", metavar="NAME")
    p.add_argument("--m", metavar="EXPR", help="selection function, e.g. 'x^2+y^2'")
    p.add_argument("--epsilon", metavar="R")
    p.add_argument("--grid", metavar="NX[,NY]")
    p.add_argument("--tmax", metavar="R")
    p.add_argument("--mode", choices=("haploid", "diploid"))
    p.add_argument("--ic", metavar="x0,y0[;x1,y1[:w]]")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--seed", metavar="N")
    p.add_argument("--jobs", metavar="N")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qalleles", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("run", "single PDE run with diagnostics and canonical ODE"),
                       ("sweep", "PDE vs canonical ODE from seeded random starts"),
                       ("check", "evaluate H1-H4 on the initial state")):
        _common(sub.add_parser(name, help=text))
    sub.add_parser("presets", help="list the built-in presets")
    return ap


def _cli_values(args) -> dict:
    vals = {"preset": args.preset, "m": args.m, "epsilon": args.epsilon,
            "t_max": args.tmax, "mode": args.mode, "ic": args.ic, "out": args.out,
            "seed": args.seed, "jobs": args.jobs}
    if args.grid is not None:
        parts = [s.strip() for s in args.grid.split(",")]
        if len(parts) not in (1, 2):
            raise ConfigError(f"--grid expects NX or NX,NY, got {args.grid!r}")
        vals["nx"] = parts[0]
        vals["ny"] = parts[-1]
    return vals


def _error_record(exc: BaseException) -> dict:
    rec = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ExprSyntaxError):
        rec["message"] = exc.msg
        rec["offset"] = exc.offset
        rec["source"] = exc.source
    if isinstance(exc, DomainError) and exc.offset is not None:
        rec["offset"] = exc.offset
    if isinstance(exc, SingularityError):
        rec["t"] = exc.t
    return rec


def _report(exc: BaseException, out: str | None) -> None:
    rec = _error_record(exc)
    text = json.dumps(rec, sort_keys=True)
    print(text, file=sys.stderr)
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            atomic_write(Path(out) / "error.json", text + "\n")
        except OSError:
            pass


def _print_presets() -> None:
    width = max(map(len, PRESETS))
    for name in PRESETS:
        print(f"{name:<{width}}  {DESCRIPTIONS.get(name, '')}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        _print_presets()
        return EXIT_OK
    out = args.out
    try:
        cfg = load(args.config, **_cli_values(args))
        out = cfg.out
        if args.command == "check":
            print(json.dumps(check_hypotheses(cfg), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "run":
            res = run_single(cfg)
            s = res.summary
            print(f"t={s['t_final']:.6g} argmax=({s['final_argmax'][0]:.6g}, "
                  f"{s['final_argmax'][1]:.6g}) rho={s['final_rho']:.6g} -> {res.out}")
            return EXIT_OK
        res = run_sweep(cfg)
        s = res["summary"]
        print(f"{s['count']} pairs, {s['failed']} failed, "
              f"max discrepancy {s['max_discrepancy']} -> {cfg.out}")
        return EXIT_PARTIAL if s["failed"] else EXIT_OK
    except _CONFIG_ERRORS as exc:
        _report(exc, out)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        _report(exc, out)
        return EXIT_NUMERICAL
    except OSError as exc:
        _report(exc, None)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
