"""Command-line front end: ``rhmlab <experiment> [flags]``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .harness import ConfigError, ExperimentConfig, default_workers, run, write
from .noise import geometric_t_grid

DEFAULT_EPS_GRID = "0:1:0.05"
DEFAULT_T_GRID = ["geometric", "0.01:5:40"]
DEFAULT_FRAC_GRID = "0:1:0.05"


def parse_range(text: str) -> tuple:
    """``a:b:step`` to an inclusive, strictly increasing tuple of floats."""
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}") from None
    if not (step > 0 and b >= a):
        raise argparse.ArgumentTypeError(f"grid {text!r} is not increasing")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    # round away representation noise such as 0.15000000000000002
    return tuple(float(round(a + k * step, 12)) for k in range(n))


def parse_t_grid(tokens) -> tuple:
    """``[geometric|linear] a:b:n``; geometric is the default spacing."""
    kind = "geometric"
    if len(tokens) == 2:
        kind, spec = tokens
    elif len(tokens) == 1:
        (spec,) = tokens
    else:
        raise argparse.ArgumentTypeError("expected [geometric|linear] a:b:n")
    try:
        a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {spec!r}") from None
    if n < 1 or (n > 1 and not b > a):
        raise argparse.ArgumentTypeError(f"t grid {spec!r} is not increasing")
    if kind == "geometric":
        if a <= 0:
            raise argparse.ArgumentTypeError("geometric t grid needs a > 0")
        return tuple(float(x) for x in geometric_t_grid(a, b, n))
    if kind == "linear":
        return tuple(float(x) for x in np.linspace(a, b, n))
    raise argparse.ArgumentTypeError(f"unknown grid spacing {kind!r}")


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--trials", type=int, default=20, help="independent realizations per grid point (default 20)")
    p.add_argument("--workers", type=int, default=default_workers(),
                   help="worker processes (default $RHM_LAB_WORKERS or 1)")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv", help="output format")


def _grammar(p, need_m=True, need_L=True):
    p.add_argument("--v", type=int, required=True, help="alphabet size")
    p.add_argument("--s", type=int, default=2, help="branching factor (default 2)")
    if need_m:
        p.add_argument("--m", type=int, required=True, help="productions per symbol")
    if need_L:
        p.add_argument("--L", type=int, required=True, help="depth")


def _eps_grid(p):
    p.add_argument("--eps-grid", dest="grid", type=parse_range, default=parse_range(DEFAULT_EPS_GRID),
                   metavar="A:B:STEP", help=f"noise grid (default {DEFAULT_EPS_GRID})")


def _t_grid(p):
    p.add_argument("--t-grid", dest="grid", nargs="+", default=DEFAULT_T_GRID, metavar="TOKEN",
                   help="time grid '[geometric|linear] a:b:n' (default 'geometric 0.01:5:40')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhmlab", description="Belief-propagation denoising experiments on random hierarchy grammars.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="EXPERIMENT")

    p = sub.add_parser("denoise-eps", help="BP layer curves under eps-process corruption")
    _grammar(p)
    _eps_grid(p)
    _common(p)

    p = sub.add_parser("denoise-time", help="BP layer curves under diffusion corruption")
    _grammar(p)
    _t_grid(p)
    _common(p)

    p = sub.add_parser("meanfield-profile", help="mean-field up/down/combined beliefs per layer")
    _grammar(p)
    _eps_grid(p)
    _common(p)

    p = sub.add_parser("phase-diagram", help="theory vs BP inference verdicts over (m, eps)")
    _grammar(p, need_m=False)
    p.add_argument("--m-list", type=_int_list, required=True, help="comma-separated m values, e.g. 4,8,16")
    _eps_grid(p)
    _common(p)

    p = sub.add_parser("iteration-map", help="trace of the upward mean-field map F(p)")
    _grammar(p, need_L=False)
    p.add_argument("--points", type=int, default=201, help="number of p values on [1/v, 1]")
    _common(p)

    p = sub.add_parser("eps-map", help="effective eps(t) of the diffusion leaf beliefs")
    p.add_argument("--v", type=int, required=True, help="alphabet size")
    p.add_argument("--leaves", type=int, default=1024, help="leaves per realization (default 1024)")
    _t_grid(p)
    _common(p)

    p = sub.add_parser("gaussian-flip", help="mode-flip rate of the two-mode Gaussian control")
    p.add_argument("--d", type=int, default=1024, help="dimension (default 1024)")
    p.add_argument("--sigma", type=float, default=1.0, help="mode width (default 1)")
    p.add_argument("--steps", type=int, default=1000, help="diffusion steps T (default 1000)")
    p.add_argument("--frac-grid", dest="grid", type=parse_range, default=parse_range(DEFAULT_FRAC_GRID),
                   metavar="A:B:STEP", help=f"inversion times as fractions of T (default {DEFAULT_FRAC_GRID})")
    _common(p)

    p = sub.add_parser("oracle-check", help="BP vs exhaustive enumeration on small grammars")
    _grammar(p)
    _common(p)
    return parser


def cli_parse(argv=None) -> ExperimentConfig:
    """Parse and validate; raises ``SystemExit(2)`` on usage errors."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    args = vars(ns)
    if ns.kind in ("denoise-time", "eps-map"):
        try:
            args["grid"] = parse_t_grid(ns.grid)
        except argparse.ArgumentTypeError as exc:
            parser.error(str(exc))
    if ns.kind in ("iteration-map", "oracle-check"):
        args.setdefault("grid", ())
    try:
        return ExperimentConfig(**args)
    except ConfigError as exc:
        parser.error(str(exc))


def main(argv=None) -> int:
    config = cli_parse(argv)
    envelope = run(config)
    write(envelope)
    for key, err in envelope.failures:
        print(f"cell {key} failed: {err}", file=sys.stderr)
    print(f"{len(envelope.cells)} cells in {envelope.wall_time:.2f} s", file=sys.stderr)
    return envelope.exit_code


if __name__ == "__main__":
    sys.exit(main())
