"""Time a full BP pass with each available kernel backend.

    python3 benchmarks/bench_bp.py [--v 32 --s 2 --m 8 --L 10 --repeat 20]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from rhmlab import bp
from rhmlab.experiments import trial_instance
from rhmlab.grammar import RhmParams
from rhmlab.kernels import available_backends
from rhmlab.noise import epsilon_beliefs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--v", type=int, default=32)
    ap.add_argument("--s", type=int, default=2)
    ap.add_argument("--m", type=int, default=8)
    ap.add_argument("--L", type=int, default=10)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    params = RhmParams(args.v, args.s, args.m, args.L)
    rules, sample = trial_instance(params, 0, 0)
    beliefs = epsilon_beliefs(sample, args.eps)
    print(f"v={args.v} s={args.s} m={args.m} L={args.L} leaves={params.d}")

    ref = None
    timings = {}
    for name in available_backends():
        msgs = bp.run_bp(rules, beliefs, backend=name)
        margs = bp.node_marginals(msgs)
        if ref is None:
            ref = margs
        dev = max(float(np.abs(a - b).max()) for a, b in zip(margs, ref))
        best = min(timeit.repeat(lambda: bp.run_bp(rules, beliefs, backend=name), number=1, repeat=args.repeat))
        timings[name] = best
        print(f"{name:>8}: {best * 1e3:8.2f} ms per pass (max dev vs first backend {dev:.1e})")
    if "numpy" in timings and "cython" in timings:
        print(f" speedup: {timings['numpy'] / timings['cython']:.1f}x")


if __name__ == "__main__":
    main()
