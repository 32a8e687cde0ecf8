"""Command-line entry point: ``cnwfb --scenario string-obstacle --out run1``.

Flags override values from ``--config``; unset flags fall back to the
scenario defaults.  ``CNWFB_OUT`` supplies the output directory when
neither ``--out`` nor the config file does.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, build_config, read_config_file
from .driver import run, sweep
from .scenarios import SCENARIOS
from .scheme import ConvergenceError

log = logging.getLogger("cnwfb")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cnwfb",
        description="Energy-conserving variational time stepping for the wave equation "
        "with obstacle, adhesion and droplet constraints; writes CSV artifacts.",
    )
    S = argparse.SUPPRESS
    p.add_argument("--config", metavar="FILE", help="flat 'key = value' configuration file")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default=S)
    p.add_argument("--scheme", choices=["cn", "dmf"], default=S)
    p.add_argument("--h", default=S, help="time step")
    p.add_argument("--dx", default=S, help="1D element width (defaults to h)")
    p.add_argument("--nx", default=S, help="2D subdivisions along x")
    p.add_argument("--ny", default=S, help="2D subdivisions along y")
    p.add_argument("--T", default=S, help="final time")
    p.add_argument("--n", default=S, help="standing-wave frequency")
    p.add_argument("--cutoff", choices=["on", "off"], default=S)
    p.add_argument("--Q", default=S, help="adhesion strength")
    p.add_argument("--adhesion-eps", default=S, help="mollifier width")
    p.add_argument("--fb-eps", default=S, help="free-boundary threshold")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--snapshot-stride", default=S, help="steps between snapshots (0 = auto)")
    p.add_argument("--linear-tol", default=S)
    p.add_argument("--descent-tol", default=S)
    p.add_argument("--max-iters", default=S)
    p.add_argument("--sweep-h", default=S, metavar="A,B,C")
    p.add_argument("--sweep-n", default=S, metavar="1,2,4")
    p.add_argument("--sweep-scheme", default=S, metavar="cn,dmf")
    p.add_argument("--jobs", default=S, help="parallel sweep cells")
    p.add_argument("--dump-mesh", action="store_const", const="on", default=S)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_config(argv=None):
    args = vars(build_parser().parse_args(argv))
    verbose = args.pop("verbose")
    path = args.pop("config", None)
    values = read_config_file(path) if path else {}
    values.update(args)
    return build_config(values), verbose


def main(argv=None) -> int:
    try:
        cfg, verbose = parse_config(argv)
    except (ConfigError, OSError) as exc:
        print(f"cnwfb: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if cfg.is_sweep:
            status, rows = sweep(cfg)
            for r in rows:
                if r["status"] != "ok":
                    print(f"cnwfb: cell {r['scheme']} h={r['h']} n={r['n']} failed: {r['error']}", file=sys.stderr)
            return status
        return run(cfg)
    except (ConvergenceError, ValueError, RuntimeError) as exc:
        print(f"cnwfb: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
