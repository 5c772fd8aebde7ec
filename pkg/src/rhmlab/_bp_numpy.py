"""Vectorised numpy implementation of the per-layer BP sums.

Both functions take the rule table of one layer, shape ``(v, m, s)``, and
iterate over the ``m*v`` existing productions only.  Rows whose normaliser
is zero are left at zero and counted in the second return value.
"""

import numpy as np


def _normalize(rows):
    z = rows.sum(axis=-1, keepdims=True)
    bad = z == 0
    np.divide(rows, z, out=rows, where=~bad)
    return int(bad.sum())


def _gather(child_up, rules, i):
    # (n, v, m): child i's belief in the i-th symbol of each production
    return child_up[:, i, :][:, rules[:, :, i]]


def upward_layer(child_up, rules):
    """child_up: (n, s, v) -> parent messages (n, v)."""
    child_up = np.asarray(child_up, dtype=float)
    s = rules.shape[2]
    prod = _gather(child_up, rules, 0).copy()
    for i in range(1, s):
        prod *= _gather(child_up, rules, i)
    out = prod.sum(axis=2)
    return out, _normalize(out)


def downward_layer(parent_down, child_up, rules):
    """parent_down: (n, v), child_up: (n, s, v) -> child messages (n, s, v)."""
    parent_down = np.asarray(parent_down, dtype=float)
    child_up = np.asarray(child_up, dtype=float)
    n, s, v = child_up.shape
    gathered = [_gather(child_up, rules, i) for i in range(s)]
    out = np.empty((n, s, v))
    base = (np.arange(n) * v)[:, None, None]
    for j in range(s):
        w = np.broadcast_to(parent_down[:, :, None], gathered[0].shape).copy()
        for i in range(s):
            if i != j:
                w *= gathered[i]
        idx = base + rules[None, :, :, j]
        out[:, j, :] = np.bincount(idx.ravel(), weights=w.ravel(), minlength=n * v).reshape(n, v)
    return out, _normalize(out)
