"""Command line driver.

    critwave run --config small_data.cfg --out results/
    critwave verify --config standard.cfg --verify energy,ledger
    critwave sweep --config small_data.cfg --sweep data.amplitude=0.01,0.001 --workers 2

Exit status: 0 when every requested suite passes, 1 when one fails,
2 for configuration errors, 3 when the solver aborts.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources

from . import config as cfgmod
from . import runner
from .evolve import SolverAbort
from .nonlinearity import SaturationError


def bundled_config(name: str) -> str:
    """Text of a config shipped with the package (e.g. ``small_data``)."""
    fname = name if name.endswith(".cfg") else name + ".cfg"
    return resources.files("critwave").joinpath("configs", fname).read_text()


def _load(path):
    if path is None:
        return cfgmod.RunConfig()
    if path.startswith("bundled:"):
        return cfgmod.loads(bundled_config(path.split(":", 1)[1]))
    return cfgmod.load(path)


def build_parser():
    p = argparse.ArgumentParser(prog="critwave", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=runner.COMMANDS)
    p.add_argument("--config", metavar="PATH",
                   help="run configuration; 'bundled:NAME' picks a shipped one")
    p.add_argument("--out", metavar="DIR", help="output directory (default: $CRITWAVE_OUT/output.dir)")
    p.add_argument("--verify", metavar="SUITE[,SUITE...]",
                   help=f"suites to run, from: {', '.join(cfgmod.SUITES)}")
    p.add_argument("--sweep", metavar="KEY=v1,v2,...", action="append", default=[],
                   help="sweep axis (repeatable); the cartesian product is run")
    p.add_argument("--workers", type=int, default=1, metavar="N")
    p.add_argument("--record", action="store_true", help="also write record.bin")
    return p


def _report(summary, stream):
    for s in summary.suites:
        for c in s.checks:
            mark = "PASS" if c.passed else "FAIL"
            if not c.required:
                mark += " (info)"
            tol = "" if c.tolerance is None else f" {c.relation} {c.tolerance}"
            print(f"[{mark}] {s.name}: {c.name} = {c.value:.6g}{tol}", file=stream)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config)
        suites = [s.strip() for s in args.verify.split(",") if s.strip()] if args.verify else None
        out = runner.output_root(args.out, cfg)
        if args.command == "sweep":
            if args.workers < 1:
                raise cfgmod.ConfigError("--workers must be >= 1")
            axes = runner.parse_sweep(args.sweep)
            results = runner.sweep(cfg, axes, out, suites, args.workers)
            for label, ok, drift, total in results:
                print(f"[{'PASS' if ok else 'FAIL'}] {label}: drift {drift:.3g}, ledger {total:.6g}")
            return 0 if all(r[1] for r in results) else 1
        if args.sweep:
            raise cfgmod.ConfigError("--sweep only applies to the sweep command")
        summary = runner.run(cfg, args.command, suites, out, write_record=args.record)
    except cfgmod.ConfigError as e:
        print(f"critwave: config error: {e}", file=sys.stderr)
        return 2
    except (SolverAbort, SaturationError) as e:
        print(f"critwave: solver aborted: {e}", file=sys.stderr)
        return 3
    _report(summary, sys.stdout)
    print(f"wrote {out}", file=sys.stdout)
    return 0 if summary.passed else 1


if __name__ == "__main__":
    sys.exit(main())
