"""Leaf-belief initialisations: continuous-time diffusion and the uniform
epsilon-corruption, plus the map from diffusion time to an effective epsilon."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .grammar import SampleTree, encode_onehot


@dataclass(frozen=True)
class DiffusionSchedule:
    """Continuous schedule with ``alpha_bar(t) = exp(-2 t)``."""

    t_max: float = 5.0
    kind: str = "continuous-exponential"

    def alpha_bar(self, t):
        return np.exp(-2.0 * np.asarray(t, dtype=float))

    def delta(self, t) -> float:
        """Temperature of the leaf posterior; ``inf`` once alpha_bar underflows."""
        ab = float(self.alpha_bar(t))
        if ab == 0.0:
            return math.inf
        return (1.0 - ab) / math.sqrt(ab)


def geometric_t_grid(start=0.01, stop=5.0, n=40) -> np.ndarray:
    return np.geomspace(start, stop, n)


@dataclass(frozen=True, eq=False)
class NoisyLeaves:
    values: np.ndarray
    t: float
    source: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class BeliefField:
    """Per-leaf probability vectors; ``origin`` is e.g. ``("epsilon", 0.3)``."""

    values: np.ndarray
    origin: tuple = ()

    def to_csv(self) -> str:
        return beliefs_to_csv(self.values)


def beliefs_to_csv(values) -> str:
    values = np.asarray(values)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["leaf"] + [f"b{k}" for k in range(1, values.shape[1] + 1)])
    for i, row in enumerate(values, start=1):
        w.writerow([i] + [format(float(x), ".17g") for x in row])
    return buf.getvalue()


def beliefs_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    return np.array([[float(x) for x in r[1:]] for r in rows[1:]])


def diffuse_leaves(encoding, t: float, schedule: DiffusionSchedule, rng: np.random.Generator) -> NoisyLeaves:
    if t < 0:
        raise ValueError("t must be nonnegative")
    x0 = np.asarray(encoding, dtype=float)
    if t == 0:
        return NoisyLeaves(x0.copy(), 0.0, x0)
    ab = float(schedule.alpha_bar(t))
    eta = rng.standard_normal(x0.shape)
    return NoisyLeaves(math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eta, float(t), x0)


def bayes_leaf_beliefs(noisy, schedule: DiffusionSchedule, t: float | None = None) -> BeliefField:
    """Posterior over each leaf's clean symbol under a uniform prior.

    Row-wise softmax of ``x / delta_t``; at ``t = 0`` the one-hot limit at the
    row argmax (lowest index on ties).
    """
    if isinstance(noisy, NoisyLeaves):
        x, t = noisy.values, noisy.t
    else:
        x = np.asarray(noisy, dtype=float)
        if t is None:
            raise ValueError("t is required for a bare array")
    if t == 0:
        out = np.zeros_like(x)
        out[np.arange(x.shape[0]), np.argmax(x, axis=1)] = 1.0
        return BeliefField(out, ("diffusion", 0.0))
    delta = schedule.delta(t)
    if math.isinf(delta):
        return BeliefField(np.full_like(x, 1.0 / x.shape[1]), ("diffusion", float(t)))
    z = x / delta
    z = z - z.max(axis=1, keepdims=True)
    w = np.exp(z)
    return BeliefField(w / w.sum(axis=1, keepdims=True), ("diffusion", float(t)))


def diffusion_beliefs(sample: SampleTree, t: float, rng, schedule: DiffusionSchedule | None = None) -> BeliefField:
    schedule = schedule or DiffusionSchedule()
    return bayes_leaf_beliefs(diffuse_leaves(encode_onehot(sample), t, schedule, rng), schedule)


def epsilon_beliefs(sample, eps: float, v: int | None = None) -> BeliefField:
    """Truth gets ``1 - eps + eps/v``, every other symbol ``eps/v``.

    ``sample`` is a :class:`SampleTree` or an array of 0-based leaf symbols
    (then ``v`` is required).
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if isinstance(sample, SampleTree):
        leaves, v = sample.values[0], sample.params.v
    else:
        leaves = np.asarray(sample, dtype=np.intp)
    out = np.full((leaves.size, v), eps / v)
    out[np.arange(leaves.size), leaves] = 1.0 - eps + eps / v
    return BeliefField(out, ("epsilon", float(eps)))


def wrong_belief_mass(beliefs, truth) -> tuple[float, int]:
    """Sum of belief on wrong symbols and the number of wrong entries."""
    b = np.asarray(getattr(beliefs, "values", beliefs), dtype=float)
    truth = np.asarray(truth, dtype=np.intp).reshape(-1)
    b = b.reshape(-1, b.shape[-1])
    total = b.sum() - b[np.arange(b.shape[0]), truth].sum()
    return float(total), b.shape[0] * (b.shape[1] - 1)


def effective_epsilon(beliefs, sample) -> float:
    """``v`` times the mean belief on wrong symbols, pooled over all leaves
    given, clipped to [0, 1].

    ``beliefs`` may stack several realizations as ``(n, d, v)``; ``sample``
    then supplies matching 0-based truths of shape ``(n, d)``.
    """
    if isinstance(sample, SampleTree):
        truth = sample.values[0]
    else:
        truth = np.asarray(sample)
    b = np.asarray(getattr(beliefs, "values", beliefs))
    v = b.shape[-1]
    total, count = wrong_belief_mass(b, truth)
    return float(np.clip(v * total / count, 0.0, 1.0))
