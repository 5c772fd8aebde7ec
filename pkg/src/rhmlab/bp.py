"""Exact sum-product inference on the grammar tree.

Messages are stored per layer as arrays of shape ``(s**(L-l), v)``:
``up[l]`` is the message a node at layer ``l`` receives from below (at the
leaves, the leaf belief itself) and ``down[l]`` the one it receives from
above (at the root, the class prior).  Everything is linear-space with
per-node renormalisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grammar import RuleSet, SampleTree


class DegenerateMessage(ArithmeticError):
    """A message normaliser vanished: the evidence excludes every rule."""


@dataclass(frozen=True, eq=False)
class FactorTree:
    """Topology plus rule tables of one grammar instance."""

    ruleset: RuleSet

    @property
    def params(self):
        return self.ruleset.params

    @property
    def tables(self):
        return self.ruleset.tables


def as_tree(tree_or_rules) -> FactorTree:
    if isinstance(tree_or_rules, FactorTree):
        return tree_or_rules
    return FactorTree(tree_or_rules)


@dataclass(eq=False)
class MessageSet:
    up: list
    down: list | None = None
    root_prior: np.ndarray | None = None


@dataclass(eq=False)
class MarginalProfile:
    """Node marginals per layer and layer aggregates.

    ``mean_true_marginal`` and ``frac_argmax_correct`` are filled only when
    the clean tree is known.  ``ties`` counts nodes whose largest marginal is
    attained by more than one symbol (argmax then takes the lowest index).
    """

    marginals: list
    mean_max_marginal: np.ndarray
    ties: int
    mean_true_marginal: np.ndarray | None = None
    frac_argmax_correct: np.ndarray | None = None


def _belief_array(beliefs):
    return np.asarray(getattr(beliefs, "values", beliefs), dtype=float)


def upward_pass(tree, beliefs, backend=None) -> MessageSet:
    tree = as_tree(tree)
    p = tree.params
    kern = kernels.get_backend(backend)
    b = _belief_array(beliefs)
    if b.shape != (p.d, p.v):
        raise ValueError(f"beliefs must have shape {(p.d, p.v)}, got {b.shape}")
    up = [b]
    for ell in range(1, p.L + 1):
        child = up[-1].reshape(-1, p.s, p.v)
        msg, bad = kern.upward_layer(child, tree.tables[ell - 1])
        if bad:
            raise DegenerateMessage(f"{bad} zero upward normaliser(s) at layer {ell}")
        up.append(msg)
    return MessageSet(up=up)


def downward_pass(tree, up_messages, root_prior=None, backend=None) -> MessageSet:
    tree = as_tree(tree)
    p = tree.params
    kern = kernels.get_backend(backend)
    up = up_messages.up if isinstance(up_messages, MessageSet) else list(up_messages)
    if root_prior is None:
        root_prior = np.full(p.v, 1.0 / p.v)
    root_prior = np.asarray(root_prior, dtype=float)
    down = [None] * (p.L + 1)
    down[p.L] = root_prior.reshape(1, p.v).copy()
    for ell in range(p.L, 0, -1):
        child = up[ell - 1].reshape(-1, p.s, p.v)
        msg, bad = kern.downward_layer(down[ell], child, tree.tables[ell - 1])
        if bad:
            raise DegenerateMessage(f"{bad} zero downward normaliser(s) into layer {ell - 1}")
        down[ell - 1] = msg.reshape(-1, p.v)
    return MessageSet(up=up, down=down, root_prior=root_prior)


def run_bp(tree, beliefs, root_prior=None, backend=None) -> MessageSet:
    tree = as_tree(tree)
    return downward_pass(tree, upward_pass(tree, beliefs, backend), root_prior, backend)


def node_marginals(message_set: MessageSet) -> list:
    out = []
    for ell, (u, dn) in enumerate(zip(message_set.up, message_set.down)):
        prod = u * dn
        z = prod.sum(axis=1, keepdims=True)
        if np.any(z == 0):
            raise DegenerateMessage(f"zero marginal normaliser at layer {ell}")
        out.append(prod / z)
    return out


def marginals(message_set: MessageSet, truth: SampleTree | None = None) -> MarginalProfile:
    margs = node_marginals(message_set)
    mean_max = np.array([mk.max(axis=1).mean() for mk in margs])
    ties = 0
    for mk in margs:
        top = mk.max(axis=1, keepdims=True)
        ties += int(((mk == top).sum(axis=1) > 1).sum())
    prof = MarginalProfile(margs, mean_max, ties)
    if truth is not None:
        stats = reconstruction_profile(prof, truth)
        prof.mean_true_marginal = stats["mean_true_marginal"]
        prof.frac_argmax_correct = stats["frac_argmax_correct"]
    return prof


def reconstruction_profile(profile: MarginalProfile, truth: SampleTree) -> dict:
    """Per-layer mean marginal on the true symbol, mean largest marginal, and
    fraction of nodes whose argmax is the truth (nodes pooled per layer)."""
    true_m, frac = [], []
    for mk, x in zip(profile.marginals, truth.values):
        idx = np.arange(x.size)
        true_m.append(mk[idx, x].mean())
        frac.append((np.argmax(mk, axis=1) == x).mean())
    return {
        "mean_true_marginal": np.array(true_m),
        "mean_max_marginal": np.asarray(profile.mean_max_marginal),
        "frac_argmax_correct": np.array(frac),
    }


def _draw(weights, rng):
    """One categorical draw per row of nonnegative ``weights``."""
    cdf = np.cumsum(weights, axis=-1)
    total = cdf[..., -1:]
    if np.any(total <= 0):
        raise DegenerateMessage("conditioning produced a zero normaliser")
    u = rng.random(cdf.shape[:-1] + (1,)) * total
    k = (cdf <= u).sum(axis=-1)
    return np.minimum(k, weights.shape[-1] - 1)


def posterior_samples(tree, beliefs, rng, n, root_prior=None, backend=None, chunk=4096):
    """``n`` exact ancestral samples from the posterior given leaf evidence.

    Returns ``(values, choices)``: ``values[l]`` has shape ``(n, s**(L-l))``
    and ``choices[l-1]`` the production indices used at layer ``l``.

    Root first, from its marginal; then, descending, each node's children
    are drawn conditionally on the already-sampled parent.  Given a clamped
    parent ``y`` the children tuple is one of ``y``'s productions, selected
    with weight equal to the product of the children's upward messages, so
    sampling the production index is the same as clamping the children one
    at a time and recomputing their downward messages.
    """
    tree = as_tree(tree)
    p = tree.params
    msgs = upward_pass(tree, beliefs, backend)
    up = msgs.up
    prior = np.full(p.v, 1.0 / p.v) if root_prior is None else np.asarray(root_prior, float)
    root_w = up[p.L][0] * prior
    values = [np.empty((n, p.layer_size(ell)), dtype=np.intp) for ell in range(p.L + 1)]
    choices = [np.empty((n, p.layer_size(ell)), dtype=np.intp) for ell in range(1, p.L + 1)]
    chunk = max(1, min(chunk, 2_000_000 // (p.d * p.m)))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        k = hi - lo
        values[p.L][lo:hi, 0] = _draw(np.broadcast_to(root_w, (k, p.v)), rng)
        for ell in range(p.L, 0, -1):
            parents = values[ell][lo:hi]
            prods = tree.tables[ell - 1][parents]  # (k, N, m, s)
            child_up = up[ell - 1].reshape(-1, p.s, p.v)
            w = np.ones(prods.shape[:3])
            node = np.arange(parents.shape[1])[None, :, None]
            for i in range(p.s):
                w *= child_up[node, i, prods[..., i]]
            r = _draw(w, rng)
            choices[ell - 1][lo:hi] = r
            picked = np.take_along_axis(prods, r[..., None, None], axis=2)[:, :, 0, :]
            values[ell - 1][lo:hi] = picked.reshape(k, -1)
    return values, choices


def posterior_sample(tree, beliefs, rng, root_prior=None, backend=None) -> SampleTree:
    tree = as_tree(tree)
    values, choices = posterior_samples(tree, beliefs, rng, 1, root_prior, backend)
    return SampleTree(tree.params, tuple(x[0] for x in values), tuple(c[0] for c in choices))
