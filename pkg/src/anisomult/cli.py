"""Command line entry point: ``anisomult run | verify-appendices | bump build | report``.

Exit status: 0 when every verdict or check passes, 1 when a computation
completed but failed its acceptance rule, 2 on configuration or stage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import AnisomultError, ConfigurationError
from .scenario import StageError, cached_bump, load_config, load_scenario, render_report, run_scenario, verify_appendices

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _cmd_run(args) -> int:
    sc = load_scenario(args.config)
    summary = run_scenario(sc, args.out)
    for v in summary.verdicts:
        tag = f"p={v.p}" + (f" (conjugate {v.p_run})" if v.conjugate else "")
        msg = f"{sc.name} {tag}: functional {v.functional_verdict}"
        if v.measured_exponent is not None:
            msg += f", exponent {v.measured_exponent:.4f} vs {v.predicted_exponent:.4f}"
        print(msg + (" PASS" if v.passed else " FAIL"))
    return EXIT_OK if summary.passed else EXIT_FAIL


def _cmd_verify(args) -> int:
    reports = verify_appendices(load_config(args.config), args.out, workers=args.workers)
    for r in reports:
        line = f"{r.name}: {'PASS' if r.passed else 'FAIL'}"
        if r.error:
            line += f" ({r.error})"
        elif "cause" in r.detail:
            line += f" ({r.detail['cause']})"
        print(line)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _cmd_bump(args) -> int:
    from .bump import fourier_leakage, save_bump

    bump = cached_bump(args.h, not args.no_certify, args.resolution)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_bump(bump, out)
    info = {**bump.summary(), "overlap_bound": bump.overlap.bound, "leakage": fourier_leakage(bump).relative}
    print(json.dumps(info, indent=2))
    return EXIT_OK


def _cmd_report(args) -> int:
    text, ok = render_report(args.run_dir)
    print(text, end="")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisomult", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario configuration")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    run.set_defaults(fn=_cmd_run)

    ver = sub.add_parser("verify-appendices", help="run the bump and trigonometric-polynomial checks")
    ver.add_argument("config")
    ver.add_argument("--out", default=None)
    ver.add_argument("--workers", type=int, default=1)
    ver.set_defaults(fn=_cmd_verify)

    bump = sub.add_parser("bump", help="bump function utilities")
    bsub = bump.add_subparsers(dest="bump_command", required=True)
    build = bsub.add_parser("build", help="construct, certify and tabulate the bump")
    build.add_argument("--h", type=float, default=None, help="explicit scale (default: certified)")
    build.add_argument("--no-certify", action="store_true", help="skip the overlap certification")
    build.add_argument("--resolution", type=int, default=4096)
    build.add_argument("--out", default="bump.csv")
    build.set_defaults(fn=_cmd_bump)

    rep = sub.add_parser("report", help="summarize a finished run directory")
    rep.add_argument("run_dir")
    rep.set_defaults(fn=_cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except StageError as exc:
        print(json.dumps(exc.record), file=sys.stderr)
        return EXIT_ERROR
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (AnisomultError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
