"""Command-line entry point ``lab``.

Subcommands::

    lab run <config.json> [--out DIR] [--seed N]
    lab sweep <dir-of-configs> [--out DIR]
    lab tailfit <point.csv> --window T0 T1

The exit status is 0 iff every check passes, 1 if a check fails and 2
for unusable input (schema errors, missing files).
"""

from __future__ import annotations

import argparse
import sys

from .runner import ConfigError, canonical, load_dir, parse_config, run, sweep


def _print_checks(checks):
    for c in checks:
        flag = "PASS" if c["pass"] else "FAIL"
        print(f"{flag}  {c['name']}: value={c['value']:.6g} {c['sense']} {c['tolerance']:.3g}")


def _cmd_run(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        config = parse_config(fh.read())
    rep = run(config, out_dir=args.out, seed=args.seed)
    _print_checks(rep["checks"])
    if "error" in rep["summary"]:
        print(rep["summary"]["error"], file=sys.stderr)
    print("overall:", "PASS" if rep["pass"] else "FAIL")
    return 0 if rep["pass"] else 1


def _cmd_sweep(args) -> int:
    configs, names = load_dir(args.directory)
    rep = sweep(configs, out_dir=args.out, names=names)
    for row in rep["rows"]:
        print(f"{'PASS' if row['pass'] else 'FAIL'}  {row['name']}")
    _print_checks(rep["checks"])
    print("overall:", "PASS" if rep["pass"] else "FAIL")
    return 0 if rep["pass"] else 1


def _cmd_tailfit(args) -> int:
    from .solver import read_point_csv, tail_fit
    data = read_point_csv(args.csv)
    slope, err = tail_fit(data, (args.window[0], args.window[1]))
    result = {"slope": slope, "stderr": err, "window": list(args.window)}
    ok = True
    if args.expect is not None:
        ok = abs(slope - args.expect) <= args.tol
        result.update(expected=args.expect, tolerance=args.tol, **{"pass": ok})
    sys.stdout.write(canonical(result))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.add_argument("--seed", type=int, default=None, help="seed (overrides the config)")
    r.set_defaults(func=_cmd_run)
    s = sub.add_parser("sweep", help="run every *.json config of a directory")
    s.add_argument("directory")
    s.add_argument("--out", default="lab_sweep")
    s.set_defaults(func=_cmd_sweep)
    t = sub.add_parser("tailfit", help="power-law slope of a point series")
    t.add_argument("csv")
    t.add_argument("--window", nargs=2, type=float, required=True, metavar=("T0", "T1"))
    t.add_argument("--expect", type=float, default=None, help="expected slope to check")
    t.add_argument("--tol", type=float, default=0.3)
    t.set_defaults(func=_cmd_tailfit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
