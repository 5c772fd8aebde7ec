"""Random Hierarchy Model: parameters, random grammars, and data generation.

Symbols are 1-based (``1..v``) at every public boundary and 0-based inside
arrays.  A grammar of depth ``L`` has one rule table per layer; table ``k``
(``k = 0..L-1``) rewrites a symbol at layer ``k + 1`` into an ``s``-tuple at
layer ``k``.  Layer 0 holds the ``d = s**L`` observable leaves, layer ``L``
holds the class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

FORMAT_VERSION = 1
MAX_LEAVES = 2**40


class InvalidParams(ValueError):
    """Raised when a parameter set violates a model constraint."""


@dataclass(frozen=True)
class RhmParams:
    """Shape of a hierarchy: alphabet ``v``, branching ``s``, ``m`` rules per
    symbol, depth ``L``."""

    v: int
    s: int
    m: int
    L: int

    def __post_init__(self):
        for name in ("v", "s", "m", "L"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidParams(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise InvalidParams(f"{name} >= 1 violated ({name}={value})")
            object.__setattr__(self, name, int(value))
        if self.s < 2:
            raise InvalidParams(f"s >= 2 violated (s={self.s})")
        if self.m * self.v > self.v**self.s:
            raise InvalidParams(
                f"m*v <= v**s violated (m*v={self.m * self.v} > v**s={self.v**self.s})"
            )
        if self.s**self.L > MAX_LEAVES:
            raise InvalidParams(f"s**L <= 2**40 violated (s**L={self.s**self.L})")

    @property
    def d(self) -> int:
        return self.s**self.L

    @property
    def f_exact(self) -> Fraction:
        return Fraction(self.m * self.v - 1, self.v**self.s - 1)

    @property
    def f_approx(self) -> Fraction:
        return Fraction(self.m, self.v ** (self.s - 1))

    @property
    def n_tuples(self) -> int:
        return self.v**self.s

    def layer_size(self, layer: int) -> int:
        return self.s ** (self.L - layer)

    @property
    def n_internal(self) -> int:
        """Number of nodes that carry a production choice (layers 1..L)."""
        return (self.d - 1) // (self.s - 1)


def new_params(v, s, m, L) -> RhmParams:
    return RhmParams(v=v, s=s, m=m, L=L)


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RuleSet:
    """A sampled grammar.

    ``tables[k]`` has shape ``(v, m, s)``: ``tables[k][y, r]`` is the r-th
    production (0-based symbols) of parent ``y`` at layer ``k + 1``.
    """

    params: RhmParams
    tables: tuple
    seed: int | None = None
    _inverse: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        p = self.params
        tables = tuple(_freeze(np.asarray(t, dtype=np.intp)) for t in self.tables)
        if len(tables) != p.L:
            raise ValueError(f"expected {p.L} rule tables, got {len(tables)}")
        for t in tables:
            if t.shape != (p.v, p.m, p.s):
                raise ValueError(f"rule table shape {t.shape} != {(p.v, p.m, p.s)}")
            if t.min() < 0 or t.max() >= p.v:
                raise ValueError("rule table symbol out of range")
            if len({tuple(row) for row in t.reshape(-1, p.s)}) != p.m * p.v:
                raise ValueError("productions within a layer must be distinct")
        object.__setattr__(self, "tables", tables)

    def __eq__(self, other):
        if not isinstance(other, RuleSet):
            return NotImplemented
        return (
            self.params == other.params
            and self.seed == other.seed
            and all(np.array_equal(a, b) for a, b in zip(self.tables, other.tables))
        )

    __hash__ = None

    def productions(self, layer: int, parent: int) -> list[tuple[int, ...]]:
        """1-based productions of ``parent`` at layer ``layer`` (1..L)."""
        t = self.tables[layer - 1][parent - 1]
        return [tuple(int(x) + 1 for x in row) for row in t]

    def parent_of(self, layer: int, children) -> int | None:
        """Inverse rule lookup with 0-based symbols; None if no rule matches."""
        inv = self._inverse.get(layer)
        if inv is None:
            t = self.tables[layer - 1]
            p = self.params
            inv = {
                tuple(int(x) for x in t[y, r]): y for y in range(p.v) for r in range(p.m)
            }
            self._inverse[layer] = inv
        return inv.get(tuple(int(x) for x in children))

    def to_json(self) -> str:
        p = self.params
        layers = []
        for ell in range(1, p.L + 1):
            layers.append(
                {str(y): [list(t) for t in self.productions(ell, y)] for y in range(1, p.v + 1)}
            )
        doc = {
            "version": FORMAT_VERSION,
            "v": p.v,
            "s": p.s,
            "m": p.m,
            "L": p.L,
            "seed": self.seed,
            "layers": layers,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "RuleSet":
        doc = json.loads(text)
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported ruleset version {doc.get('version')!r}")
        p = RhmParams(doc["v"], doc["s"], doc["m"], doc["L"])
        tables = []
        for layer in doc["layers"]:
            t = np.empty((p.v, p.m, p.s), dtype=np.intp)
            for y in range(1, p.v + 1):
                t[y - 1] = np.asarray(layer[str(y)], dtype=np.intp) - 1
            tables.append(t)
        return cls(p, tuple(tables), doc.get("seed"))


def _digits(codes, v, s):
    """Base-v expansion of tuple codes, most significant digit first."""
    out = np.empty((len(codes), s), dtype=np.intp)
    rest = np.asarray(codes, dtype=np.int64)
    for i in range(s - 1, -1, -1):
        out[:, i] = rest % v
        rest = rest // v
    return out


def sample_ruleset(params: RhmParams, seed: int) -> RuleSet:
    """Draw ``m*v`` distinct tuples per layer uniformly without replacement,
    dealt ``m`` per parent in parent-major order."""
    rng = np.random.default_rng(seed)
    p = params
    tables = []
    for _ in range(p.L):
        codes = rng.choice(p.n_tuples, size=p.m * p.v, replace=False, shuffle=True)
        tables.append(_digits(codes, p.v, p.s).reshape(p.v, p.m, p.s))
    return RuleSet(p, tuple(tables), int(seed))


@dataclass(frozen=True, eq=False)
class SampleTree:
    """All variables of one datum.

    ``values[l]`` holds the ``s**(L-l)`` 0-based symbols of layer ``l``;
    ``rule_choices[l-1]`` the production index used by each node of layer
    ``l``.
    """

    params: RhmParams
    values: tuple
    rule_choices: tuple = ()

    def __post_init__(self):
        p = self.params
        values = tuple(_freeze(np.asarray(x, dtype=np.intp)) for x in self.values)
        if len(values) != p.L + 1:
            raise ValueError(f"expected {p.L + 1} layers, got {len(values)}")
        for ell, x in enumerate(values):
            if x.shape != (p.layer_size(ell),):
                raise ValueError(f"layer {ell} has shape {x.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(
            self, "rule_choices", tuple(_freeze(np.asarray(c, dtype=np.intp)) for c in self.rule_choices)
        )

    def __eq__(self, other):
        if not isinstance(other, SampleTree):
            return NotImplemented
        return self.params == other.params and all(
            np.array_equal(a, b) for a, b in zip(self.values, other.values)
        )

    __hash__ = None

    @property
    def class_label(self) -> int:
        return int(self.values[-1][0]) + 1

    @property
    def leaves(self) -> np.ndarray:
        return self.values[0] + 1

    def symbols(self, layer: int) -> np.ndarray:
        return self.values[layer] + 1

    def is_consistent(self, ruleset: RuleSet) -> bool:
        """Check every parent/children group against the grammar."""
        p = self.params
        for ell in range(1, p.L + 1):
            groups = self.values[ell - 1].reshape(-1, p.s)
            for y, kids in zip(self.values[ell], groups):
                if ruleset.parent_of(ell, kids) != y:
                    return False
        return True

    def to_json(self) -> str:
        return json.dumps(
            {
                "class": self.class_label,
                "leaves": self.leaves.tolist(),
                "layers": [(x + 1).tolist() for x in self.values],
            }
        )

    @classmethod
    def from_json(cls, text: str, params: RhmParams) -> "SampleTree":
        doc = json.loads(text)
        values = [np.asarray(x, dtype=np.intp) - 1 for x in doc["layers"]]
        tree = cls(params, tuple(values))
        if tree.class_label != doc["class"] or tree.leaves.tolist() != doc["leaves"]:
            raise ValueError("class/leaves fields disagree with layers")
        return tree


def generate_sample(ruleset: RuleSet, class_label: int, rng: np.random.Generator) -> SampleTree:
    p = ruleset.params
    if not 1 <= class_label <= p.v:
        raise ValueError(f"class must be in 1..{p.v}, got {class_label}")
    values = [np.array([class_label - 1], dtype=np.intp)]
    choices = []
    for ell in range(p.L, 0, -1):
        parents = values[-1]
        r = rng.integers(0, p.m, size=parents.size)
        values.append(ruleset.tables[ell - 1][parents, r].reshape(-1))
        choices.append(r)
    return SampleTree(p, tuple(reversed(values)), tuple(reversed(choices)))


def random_sample(ruleset: RuleSet, rng: np.random.Generator) -> SampleTree:
    """Uniform class, then :func:`generate_sample`."""
    return generate_sample(ruleset, int(rng.integers(1, ruleset.params.v + 1)), rng)


def encode_onehot(sample: SampleTree) -> np.ndarray:
    p = sample.params
    enc = np.zeros((p.d, p.v))
    enc[np.arange(p.d), sample.values[0]] = 1.0
    return enc


def decode_onehot(encoding) -> np.ndarray:
    """1-based leaf symbols of a one-hot matrix."""
    return np.argmax(np.asarray(encoding), axis=1) + 1


def count_data_per_class(params: RhmParams) -> int:
    return params.m ** params.n_internal
