"""Command-line interface.

::

    spmimo run fig2b --scale desk --out results --threads 4
    spmimo run my_spec.yaml --seed 7
    spmimo sweep --var M --from 50 --to 500 --step 50
    spmimo validate --report validation.json
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .. import __version__
from .experiments import run_experiment
from .specfile import BUILTIN_SPECS, SCALES, SCHEMES, SWEEP_VARS, SpecError, apply_scale, \
    load_spec, parse_spec
from .validation import CHECKS, validate_suite

__all__ = ["main", "build_parser"]


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="base seed (overrides the spec)")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--scale", choices=sorted(SCALES), default=None,
                   help="trial-count preset (overrides the spec)")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--fresh", action="store_true", help="ignore an existing checkpoint")
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spmimo", description="Regular vs superimposed pilots "
                                 "in multicell massive MIMO: sweeps and self-checks.")
    ap.add_argument("--version", action="version", version=f"spmimo {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run a spec file or a built-in spec")
    run.add_argument("spec", help=f"YAML file or one of: {', '.join(BUILTIN_SPECS)}")
    _common(run)

    sw = sub.add_parser("sweep", help="ad hoc rate sweep over one variable")
    sw.add_argument("--var", required=True, choices=SWEEP_VARS)
    sw.add_argument("--from", dest="start", type=float, required=True)
    sw.add_argument("--to", dest="stop", type=float, required=True)
    sw.add_argument("--step", type=float, required=True)
    sw.add_argument("--schemes", nargs="+", choices=SCHEMES, default=list(SCHEMES))
    sw.add_argument("--n-networks", type=int, default=None)
    sw.add_argument("--n-fading", type=int, default=None)
    sw.add_argument("--name", default=None)
    _common(sw)

    val = sub.add_parser("validate", help="run the oracle and invariant checks")
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--only", nargs="+", choices=sorted(CHECKS), default=None)
    val.add_argument("--report", default=None, help="write the JSON report here")
    val.add_argument("--quiet", action="store_true")
    return ap


def _num(x: float):
    return int(x) if float(x).is_integer() else x


def _execute(spec, args) -> int:
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    if args.scale:
        spec = apply_scale(spec, args.scale)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{spec.name}: {done}/{total} deployments", end="", file=sys.stderr,
                  flush=True)

    res = run_experiment(spec, args.out, threads=args.threads, resume=not args.fresh,
                         progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
        print(f"wrote {len(res.files)} files to {res.out_dir}")
        for c in res.invariants:
            if not c["passed"]:
                print(f"invariant failed: {c}")
    return 0 if res.ok else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return _execute(load_spec(args.spec), args)
        if args.cmd == "sweep":
            data = {"name": args.name or f"sweep_{args.var}", "scenario": "rate",
                    "sweep": {"var": args.var, "from": _num(args.start), "to": _num(args.stop),
                              "step": _num(args.step)},
                    "schemes": args.schemes,
                    "mc_schemes": ["sp_estsub"] if "sp_estsub" in args.schemes else []}
            if args.n_networks is not None:
                data["n_networks"] = args.n_networks
            if args.n_fading is not None:
                data["n_fading"] = args.n_fading
            return _execute(parse_spec(data, source="<command line>"), args)
        rep = validate_suite(args.seed, only=args.only, progress=None if args.quiet else (
            lambda c: print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  ({c.seconds:.1f} s)",
                            flush=True)))
        if args.report:
            Path(args.report).write_text(rep.to_json(), encoding="utf-8")
        for c in rep.failures:
            print(f"failed: {c.name}: observed {c.observed}, expected {c.expected}, "
                  f"tolerance {c.tolerance}", file=sys.stderr)
        return 0 if rep.passed else 1
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
