"""Exhaustive posterior over derivations, for checking BP on tiny grammars."""

from __future__ import annotations

import numpy as np

from .grammar import RuleSet

MAX_DERIVATIONS = 10**6


class TooLarge(ValueError):
    """The derivation count exceeds :data:`MAX_DERIVATIONS`."""


def enumerate_derivations(ruleset: RuleSet):
    """All ``v * m**n_internal`` derivations as per-layer symbol arrays.

    Returns a list indexed by layer; entry ``l`` has shape
    ``(n_derivations, s**(L-l))``.
    """
    p = ruleset.params
    n_deriv = p.v * p.m**p.n_internal
    if n_deriv > MAX_DERIVATIONS:
        raise TooLarge(f"{n_deriv} derivations > {MAX_DERIVATIONS}")
    codes = np.arange(n_deriv, dtype=np.int64)
    classes = codes % p.v
    rest = codes // p.v
    values = [None] * (p.L + 1)
    values[p.L] = classes[:, None].astype(np.intp)
    for ell in range(p.L, 0, -1):
        n_nodes = p.layer_size(ell)
        r = np.empty((n_deriv, n_nodes), dtype=np.intp)
        for k in range(n_nodes):
            r[:, k] = rest % p.m
            rest = rest // p.m
        kids = ruleset.tables[ell - 1][values[ell], r]  # (n, n_nodes, s)
        values[ell - 1] = kids.reshape(n_deriv, -1)
    return values


def brute_force_posterior(ruleset: RuleSet, beliefs, root_prior=None) -> dict:
    """Exact node marginals by weighting every derivation with the product of
    its leaf beliefs (times the class prior) and normalising.

    Returns ``{"marginals": [...], "derivations": [...], "weights": w}``.
    """
    p = ruleset.params
    b = np.asarray(getattr(beliefs, "values", beliefs), dtype=float)
    values = enumerate_derivations(ruleset)
    prior = np.full(p.v, 1.0 / p.v) if root_prior is None else np.asarray(root_prior, float)
    w = prior[values[p.L][:, 0]]
    leaves = values[0]
    for i in range(p.d):
        w = w * b[i, leaves[:, i]]
    total = w.sum()
    if total <= 0:
        raise ZeroDivisionError("evidence excludes every derivation")
    w = w / total
    margs = []
    for ell in range(p.L + 1):
        x = values[ell]
        mk = np.zeros((x.shape[1], p.v))
        for k in range(x.shape[1]):
            mk[k] = np.bincount(x[:, k], weights=w, minlength=p.v)
        margs.append(mk)
    return {"marginals": margs, "derivations": values, "weights": w}
