"""Seeded sweeps over independent cells and deterministic table output.

A sweep is a list of cells keyed by ``(group, grid value, trial)``.  Each
cell derives its own random streams from the master seed and its key (see
:mod:`rhmlab.seeding`), so results do not depend on how cells are spread
over worker processes.  Cells are gathered, sorted by key and reduced to
rows before anything is written.
"""

from __future__ import annotations

import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, experiments, gaussian, meanfield
from .grammar import RhmParams
from .seeding import NOISE, make_rng, mix_seed, value_key

KINDS = (
    "denoise-eps",
    "denoise-time",
    "meanfield-profile",
    "phase-diagram",
    "iteration-map",
    "eps-map",
    "gaussian-flip",
    "oracle-check",
)

HEADERS = {
    "denoise-eps": ("eps_or_t", "layer", "mean_true_marginal", "mean_max_marginal", "frac_argmax_correct", "n_real", "seed"),
    "meanfield-profile": ("eps", "layer", "p_up", "p_down", "p"),
    "phase-diagram": ("sf", "m", "eps", "theory_class_p", "bp_class_p", "inference_theory", "inference_bp", "trials", "seed"),
    "iteration-map": ("p", "F(p)"),
    "eps-map": ("t", "eps_t", "n_real", "seed"),
    "gaussian-flip": ("t_over_T", "flip_rate", "ci_low", "ci_high", "n_trials", "seed"),
    "oracle-check": ("trial", "eps", "max_abs_dev", "seed"),
}
HEADERS["denoise-time"] = HEADERS["denoise-eps"]

# trials of the Gaussian control are run in vectorized batches of this size;
# the batch index plays the role of the trial index in the cell key
GAUSS_BATCH = 100

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    grid: tuple = ()
    v: int | None = None
    s: int = 2
    m: int | None = None
    L: int | None = None
    m_list: tuple = ()
    trials: int = 1
    seed: int = 0
    out: str | None = None
    workers: int = 1
    fmt: str = "csv"
    # eps-map
    leaves: int = 1024
    # iteration-map
    points: int = 201
    # gaussian-flip
    d: int = 1024
    sigma: float = 1.0
    steps: int = 1000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind not in ("iteration-map", "oracle-check"):
            if len(self.grid) == 0:
                raise ConfigError("grid must be nonempty")
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ConfigError("grid must be strictly increasing")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.kind in ("denoise-eps", "meanfield-profile", "phase-diagram", "gaussian-flip"):
            if self.grid[0] < 0.0 or self.grid[-1] > 1.0:
                raise ConfigError("grid values must lie in [0, 1]")
        if self.kind in ("denoise-time", "eps-map") and self.grid[0] < 0:
            raise ConfigError("time grid must be nonnegative")
        if self.kind != "gaussian-flip" and self.v is None:
            raise ConfigError("--v is required")
        if self.kind == "phase-diagram" and not self.m_list:
            raise ConfigError("phase-diagram needs --m-list")
        try:
            self.model_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def model_params(self) -> list:
        """The grammars the sweep touches (empty for non-grammar kinds)."""
        if self.kind in ("gaussian-flip", "eps-map"):
            return []
        if self.kind == "phase-diagram":
            return [RhmParams(self.v, self.s, m, self.L) for m in self.m_list]
        # the upward map does not depend on depth
        L = 1 if self.kind == "iteration-map" and self.L is None else self.L
        if self.m is None or L is None:
            raise ConfigError(f"{self.kind} needs --m and --L")
        return [RhmParams(self.v, self.s, self.m, L)]


@dataclass
class ResultEnvelope:
    config: ExperimentConfig
    rows: list
    cells: list
    failures: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = __version__

    @property
    def exit_code(self) -> int:
        return EXIT_PARTIAL if self.failures else EXIT_OK

    def to_csv(self) -> str:
        return format_csv(HEADERS[self.config.kind], self.rows)

    def to_json(self) -> str:
        """Machine-readable envelope.  Wall time is left out so that the
        document is a pure function of the configuration."""
        cfg = asdict(self.config)
        cfg.pop("workers")
        cfg.pop("out")
        doc = {
            "version": self.version,
            "config": cfg,
            "columns": list(HEADERS[self.config.kind]),
            "rows": [[_json_value(x) for x in row] for row in self.rows],
            "cells": [{"key": list(key), "result": _json_clean(res)} for key, res in self.cells],
            "failures": [{"key": list(key), "error": err} for key, err in self.failures],
            "counters": self.counters,
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"


# -- number formatting ---------------------------------------------------------


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_value(x) for x in row) + "\n")
    return buf.getvalue()


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _json_clean(obj):
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_json_clean(v) for v in obj]
    return _json_value(obj)


# -- cells ---------------------------------------------------------------------


def cell_keys(config: ExperimentConfig) -> list:
    """Sorted ``(group, grid index, trial)`` keys of every cell in the sweep."""
    kind = config.kind
    n = len(config.grid)
    if kind == "iteration-map":
        return [(0, 0, 0)]
    if kind == "meanfield-profile":
        return [(0, a, 0) for a in range(n)]
    if kind == "oracle-check":
        return [(0, 0, t) for t in range(config.trials)]
    if kind == "phase-diagram":
        return [(g, a, t) for g in range(len(config.m_list)) for a in range(n) for t in range(config.trials)]
    if kind == "gaussian-flip":
        n_batches = -(-config.trials // GAUSS_BATCH)
        return [(0, a, b) for a in range(n) for b in range(n_batches)]
    return [(0, a, t) for a in range(n) for t in range(config.trials)]


def _gauss_t(config, frac):
    return int(round(frac * config.steps))


def eval_cell(config: ExperimentConfig, key) -> dict:
    """Compute one cell.  Pure function of ``(config, key)``."""
    group, a, trial = key
    kind = config.kind
    level = config.grid[a] if config.grid else None
    if kind in ("denoise-eps", "denoise-time"):
        params = config.model_params()[0]
        res = experiments.denoise_cell(params, "eps" if kind == "denoise-eps" else "time", level, trial, config.seed)
        return {k: res[k] for k in ("mean_true_marginal", "mean_max_marginal", "frac_argmax_correct", "ties")}
    if kind == "phase-diagram":
        params = config.model_params()[group]
        return experiments.phase_cell(params, level, trial, config.seed)
    if kind == "eps-map":
        wrong, count = experiments.eps_map_cell(config.v, config.leaves, level, trial, config.seed)
        return {"wrong": wrong, "count": count}
    if kind == "oracle-check":
        return experiments.oracle_cell(config.model_params()[0], trial, config.seed)
    if kind == "meanfield-profile":
        st = meanfield.iterate_profiles(level, config.model_params()[0])
        return {"p_up": st.p_up, "p_down": st.p_down, "p": st.p}
    if kind == "iteration-map":
        p, fp = meanfield.iteration_map(config.model_params()[0], config.points)
        return {"p": p, "F": fp}
    if kind == "gaussian-flip":
        n = min(GAUSS_BATCH, config.trials - trial * GAUSS_BATCH)
        mp = gaussian.MixtureParams(d=config.d, sigma=config.sigma)
        sched = gaussian.DiscreteSchedule.linear(T=config.steps)
        rng = make_rng(mix_seed(config.seed, NOISE, trial, value_key(level)))
        return {"flips": gaussian.mode_flips(_gauss_t(config, level), mp, sched, n, rng), "n": n}
    raise ConfigError(kind)


def _safe_cell(args):
    config, key = args
    try:
        return key, eval_cell(config, key), None
    except Exception as exc:  # reported per cell, the sweep carries on
        return key, None, f"{type(exc).__name__}: {exc}"


def _mean_or_nan(vals, axis=0):
    return np.mean(vals, axis=axis) if len(vals) else np.nan


def _reduce(config: ExperimentConfig, results: dict) -> tuple[list, dict]:
    kind, seed = config.kind, config.seed
    rows, counters = [], {}
    by_level: dict = {}
    for (g, a, t), res in sorted(results.items()):
        if res is not None:
            by_level.setdefault((g, a), []).append(res)

    if kind in ("denoise-eps", "denoise-time"):
        L = config.L
        counters["ties"] = 0
        for a, level in enumerate(config.grid):
            cells = by_level.get((0, a), [])
            counters["ties"] += int(sum(np.sum(c["ties"]) for c in cells))
            stats = {
                k: (_mean_or_nan([c[k] for c in cells]) if cells else np.full(L + 1, np.nan))
                for k in ("mean_true_marginal", "mean_max_marginal", "frac_argmax_correct")
            }
            for ell in range(L + 1):
                rows.append((level, ell, stats["mean_true_marginal"][ell], stats["mean_max_marginal"][ell],
                             stats["frac_argmax_correct"][ell], len(cells), seed))
    elif kind == "phase-diagram":
        for g, m in enumerate(config.m_list):
            params = config.model_params()[g]
            for a, eps in enumerate(config.grid):
                cells = by_level.get((g, a), [])
                bp_p = float(_mean_or_nan([c["bp_class_p"] for c in cells]))
                r = meanfield.phase_row(params, eps, bp_p, len(cells), seed)
                rows.append(tuple(r[h] for h in HEADERS[kind]))
    elif kind == "eps-map":
        for a, t in enumerate(config.grid):
            cells = by_level.get((0, a), [])
            count = sum(c["count"] for c in cells)
            eps_t = min(1.0, max(0.0, config.v * sum(c["wrong"] for c in cells) / count)) if count else np.nan
            rows.append((t, eps_t, len(cells), seed))
    elif kind == "oracle-check":
        devs = []
        for (g, a, t), res in sorted(results.items()):
            if res is not None:
                rows.append((t, res["eps"], res["max_abs_dev"], seed))
                devs.append(res["max_abs_dev"])
        counters["max_abs_dev"] = max(devs) if devs else float("nan")
    elif kind == "meanfield-profile":
        for a, eps in enumerate(config.grid):
            for c in by_level.get((0, a), []):
                for ell in range(config.L + 1):
                    rows.append((eps, ell, c["p_up"][ell], c["p_down"][ell], c["p"][ell]))
    elif kind == "iteration-map":
        for c in by_level.get((0, 0), []):
            rows.extend(zip(c["p"], c["F"]))
    elif kind == "gaussian-flip":
        from scipy.stats import binomtest

        for a, frac in enumerate(config.grid):
            cells = by_level.get((0, a), [])
            k = sum(c["flips"] for c in cells)
            n = sum(c["n"] for c in cells)
            if n:
                ci = binomtest(k, n).proportion_ci(0.95, method="wilson")
                lo, hi = ci.low, ci.high
            else:
                lo = hi = np.nan
            rows.append((_gauss_t(config, frac) / config.steps, k / n if n else np.nan, lo, hi, n, seed))
    return rows, counters


def run(config: ExperimentConfig) -> ResultEnvelope:
    """Evaluate every cell of the sweep and reduce to output rows."""
    start = time.perf_counter()
    keys = cell_keys(config)
    tasks = [(config, key) for key in keys]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            out = list(pool.map(_safe_cell, tasks, chunksize=max(1, len(tasks) // (8 * config.workers))))
    else:
        out = [_safe_cell(t) for t in tasks]
    out.sort(key=lambda r: r[0])
    results = {key: res for key, res, _ in out}
    failures = [(key, err) for key, _, err in out if err is not None]
    rows, counters = _reduce(config, results)
    counters["failed_cells"] = len(failures)
    cells = [(key, res) for key, res, err in out if err is None]
    return ResultEnvelope(config, rows, cells, failures, counters, time.perf_counter() - start)


def write(envelope: ResultEnvelope, path: str | None = None) -> None:
    text = envelope.to_json() if envelope.config.fmt == "json" else envelope.to_csv()
    path = envelope.config.out if path is None else path
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def default_workers() -> int:
    raw = os.environ.get("RHM_LAB_WORKERS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
