"""Batch front door: neighborhood analysis, simulation runs, acceleration
comparisons and the oracle suites.

Exit codes: 0 success, 1 assertion/oracle failure, 2 usage or parse error.
Rationals on the command line are written `p/q`.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import accelerate, engine, geometry, oracles
from .errors import CaccelError, ParseError

SEED_ENV = "CACCEL_ORACLE_SEED"


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}")


def _out(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_automaton(path: str) -> engine.Automaton:
    base_dir = Path(path).parent

    def loader(name: str):
        return geometry.parse_neighborhood_offsets(_read(str(base_dir / name)))

    return engine.parse_automaton(_read(path), loader)


# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    n = geometry.parse_neighborhood(_read(args.neighborhood))
    lines = [f"offsets: {len(n)}"]
    verdict = geometry.is_complete(n, cap=args.cap)
    lines.append(f"complete: {verdict.value}")
    hull = geometry.convex_hull(n)
    lines.append("hull: " + " ".join(f"({v[0]},{v[1]})" for v in hull.vertices))
    if verdict is not geometry.Completeness.COMPLETE:
        _out("\n".join(lines) + "\nanalysis aborted: neighborhood not complete\n",
             args.out)
        return 1
    lines.append(f"k0: {geometry.k0_min(n)}")
    lines.append(f"eta: {geometry.eta_square(n)}")
    lines.append(f"tau: {geometry.tau_sync(n)}")
    for k in (2, 3, 4):
        lines.append(f"alpha[k={k}]: {geometry.alpha_group(n, k)}")
    if (0, 0) in n.offsets:
        table = geometry.real_time_table(n, 12, 12)
        lines.append("real time table (rows m=1..12, cols n=1..12):")
        for m in range(1, 13):
            lines.append("  " + " ".join(f"{table[(w, m)]:3d}" for w in range(1, 13)))
    else:
        lines.append("real time table skipped: origin not among the offsets")
    _out("\n".join(lines) + "\n", args.out)
    return 0


def cmd_run(args) -> int:
    a = _load_automaton(args.automaton)
    pic = engine.parse_picture(_read(args.picture))
    if args.recognize:
        deadline = args.deadline
        res = engine.recognize(a, pic, deadline)
        _out(f"{res.outcome} t={res.time if res.time is not None else '-'}\n", args.out)
        return 0
    config = engine.picture_configuration(pic, a.quiescent)
    frames = []
    reach = a.neighborhood.max_magnitude
    t = args.steps
    for step_no in range(t + 1):
        frames.append(f"t={step_no}")
        frames.append(_render_config(config, pic, reach * step_no))
        if step_no < t:
            config = engine.step(a, config)
    _out("\n".join(frames) + "\n", args.out)
    return 0


def _render_config(config: engine.Configuration, pic: engine.Picture, pad: int) -> str:
    lo_x, hi_x = -pad, pic.width - 1 + pad
    lo_y, hi_y = -pad, pic.height - 1 + pad
    rows = []
    for y in range(hi_y, lo_y - 1, -1):
        row = []
        for x in range(lo_x, hi_x + 1):
            s = config[(x, y)]
            row.append(str(s)[:1] if s != config.background else ".")
        rows.append("".join(row))
    return "\n".join(rows)


def cmd_accelerate(args) -> int:
    a = _load_automaton(args.automaton)
    if not a.is_recognizer:
        raise ParseError("automaton is not a recognizer (accepting/rejecting missing)")
    eps = geometry.parse_fraction(args.epsilon)
    accel = accelerate.build_accelerated(a, eps)
    pictures = [engine.parse_picture(_read(p)) for p in args.pictures]
    sizes = sorted({(p.width, p.height) for p in pictures})
    profile = accelerate.measured_profile(
        a, sizes,
        lambda w, h: engine.Picture(w, h, {(x, y): "a" for x in range(w) for y in range(h)}))
    _out(accelerate.comparison_report(a, accel, pictures, profile), args.out)
    return 0


def cmd_oracle(args) -> int:
    if args.suite not in oracles.SUITES:
        sys.stderr.write(f"unknown suite {args.suite!r}; "
                         f"choose from {', '.join(sorted(oracles.SUITES))}\n")
        return 2
    seed = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV, "0"))
    ok, report = oracles.SUITES[args.suite](seed)
    _out(report, args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="caccel",
                                 description="2D cellular-automaton acceleration toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="neighborhood geometry and constants")
    p.add_argument("neighborhood")
    p.add_argument("--cap", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("run", help="trace a run or recognize a picture")
    p.add_argument("automaton")
    p.add_argument("picture")
    p.add_argument("--steps", type=int, default=0)
    p.add_argument("--recognize", action="store_true")
    p.add_argument("--deadline", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("accelerate", help="compare base and accelerated runs")
    p.add_argument("automaton")
    p.add_argument("pictures", nargs="+")
    p.add_argument("--epsilon", required=True, help="rational p/q")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_accelerate)

    p = sub.add_parser("oracle", help="run a verification suite")
    p.add_argument("suite")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_oracle)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.fn(args)
    except ParseError as err:
        sys.stderr.write(f"error: {err}\n")
        return 2
    except CaccelError as err:
        sys.stderr.write(f"error: {err}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
