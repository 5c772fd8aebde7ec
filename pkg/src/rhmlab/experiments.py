"""Single-cell computations behind every sweep.

A cell is fully determined by its arguments: the grammar comes from
``mix_seed(seed, RULES, trial)``, the clean datum from ``mix_seed(seed,
SAMPLE, trial)`` and any noise from ``mix_seed(seed, NOISE, trial,
value_key(level))``.  The same trial therefore shares its grammar and datum
across the whole noise grid.
"""

from __future__ import annotations

import numpy as np

from . import bp
from .grammar import RhmParams, random_sample, sample_ruleset
from .noise import (
    DiffusionSchedule,
    bayes_leaf_beliefs,
    diffuse_leaves,
    diffusion_beliefs,
    epsilon_beliefs,
    wrong_belief_mass,
)
from .oracle import brute_force_posterior
from .seeding import NOISE, RULES, SAMPLE, make_rng, mix_seed, value_key


def trial_instance(params: RhmParams, trial: int, seed: int):
    rules = sample_ruleset(params, mix_seed(seed, RULES, trial))
    sample = random_sample(rules, make_rng(mix_seed(seed, SAMPLE, trial)))
    return rules, sample


def leaf_beliefs(sample, kind: str, level: float, trial: int, seed: int, schedule=None):
    if kind == "eps":
        return epsilon_beliefs(sample, level)
    if kind == "time":
        rng = make_rng(mix_seed(seed, NOISE, trial, value_key(level)))
        return diffusion_beliefs(sample, level, rng, schedule or DiffusionSchedule())
    raise ValueError(f"unknown noise kind {kind!r}")


def denoise_cell(params: RhmParams, kind: str, level: float, trial: int, seed: int, backend=None) -> dict:
    """Layer statistics of exact BP for one (noise level, realization)."""
    rules, sample = trial_instance(params, trial, seed)
    beliefs = leaf_beliefs(sample, kind, level, trial, seed)
    msgs = bp.run_bp(rules, beliefs, backend=backend)
    prof = bp.marginals(msgs, truth=sample)
    wrong, count = wrong_belief_mass(beliefs, sample.values[0])
    return {
        "mean_true_marginal": prof.mean_true_marginal,
        "mean_max_marginal": prof.mean_max_marginal,
        "frac_argmax_correct": prof.frac_argmax_correct,
        "ties": prof.ties,
        "eps_eff": params.v * wrong / count,
        "leaf_up_true": float(np.mean(msgs.up[0][np.arange(params.d), sample.values[0]])),
    }


def denoise_curves(params: RhmParams, kind: str, levels, trials: int, seed: int, stat="mean_max_marginal"):
    """Realization-averaged layer curves, shape ``(len(levels), L+1)``."""
    out = np.empty((len(levels), params.L + 1))
    for a, level in enumerate(levels):
        out[a] = np.mean([denoise_cell(params, kind, level, t, seed)[stat] for t in range(trials)], axis=0)
    return out


def phase_cell(params: RhmParams, eps: float, trial: int, seed: int) -> dict:
    """Largest class marginal after the upward pass (uniform class prior)."""
    rules, sample = trial_instance(params, trial, seed)
    up = bp.upward_pass(rules, epsilon_beliefs(sample, eps)).up
    root = up[params.L][0]
    return {"bp_class_p": float(root.max()), "true_class_p": float(root[sample.values[-1][0]])}


def eps_map_cell(v: int, n_leaves: int, t: float, trial: int, seed: int, schedule=None) -> tuple[float, int]:
    """Wrong-symbol belief mass of one diffusion realization of random leaves."""
    schedule = schedule or DiffusionSchedule()
    rng = make_rng(mix_seed(seed, NOISE, trial, value_key(t)))
    truth = rng.integers(0, v, size=n_leaves)
    enc = np.zeros((n_leaves, v))
    enc[np.arange(n_leaves), truth] = 1.0
    beliefs = bayes_leaf_beliefs(diffuse_leaves(enc, t, schedule, rng), schedule)
    return wrong_belief_mass(beliefs, truth)


def effective_epsilon_curve(v, n_leaves, t_grid, realizations, seed, schedule=None):
    out = []
    for t in t_grid:
        total = count = 0
        for r in range(realizations):
            w, c = eps_map_cell(v, n_leaves, t, r, seed, schedule)
            total += w
            count += c
        out.append(min(1.0, max(0.0, v * total / count)))
    return np.array(out)


def oracle_cell(params: RhmParams, trial: int, seed: int) -> dict:
    """Max |BP - enumeration| over all node marginals at a random eps."""
    rules, sample = trial_instance(params, trial, seed)
    eps = float(make_rng(mix_seed(seed, NOISE, trial)).random())
    beliefs = epsilon_beliefs(sample, eps)
    ours = bp.node_marginals(bp.run_bp(rules, beliefs))
    ref = brute_force_posterior(rules, beliefs)["marginals"]
    dev = max(float(np.abs(a - b).max()) for a, b in zip(ours, ref))
    return {"eps": eps, "max_abs_dev": dev}


def crossing(x, upper, lower):
    """First x where ``upper - lower`` changes sign from + to -, linearly
    interpolated; ``nan`` if the curves never cross."""
    x = np.asarray(x, float)
    diff = np.asarray(upper, float) - np.asarray(lower, float)
    for k in range(len(x) - 1):
        if diff[k] > 0 and diff[k + 1] <= 0:
            return float(x[k] + (x[k + 1] - x[k]) * diff[k] / (diff[k] - diff[k + 1]))
    return float("nan")
