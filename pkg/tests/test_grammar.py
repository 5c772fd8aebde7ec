from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from rhmlab.grammar import (
    InvalidParams,
    RhmParams,
    RuleSet,
    SampleTree,
    count_data_per_class,
    decode_onehot,
    encode_onehot,
    generate_sample,
    new_params,
    random_sample,
    sample_ruleset,
)
from rhmlab.oracle import enumerate_derivations


class TestParams:
    def test_fig5_shape(self):
        p = new_params(32, 2, 8, 10)
        assert p.d == 1024
        assert p.f_approx == Fraction(1, 4)
        assert p.f_exact == Fraction(255, 1023)

    def test_tiny(self):
        p = new_params(3, 2, 2, 2)
        assert p.d == 4
        assert p.f_exact == Fraction(5, 8)
        assert p.n_internal == 3

    def test_too_many_rules(self):
        with pytest.raises(InvalidParams, match=r"m\*v <= v\*\*s"):
            new_params(2, 2, 4, 1)

    @pytest.mark.parametrize("args", [(0, 2, 1, 1), (3, 1, 1, 1), (3, 2, 0, 1), (3, 2, 1, 0), (3.0, 2, 1, 1)])
    def test_rejects_bad_values(self, args):
        with pytest.raises(InvalidParams):
            RhmParams(*args)

    def test_leaf_guard(self):
        RhmParams(2, 2, 1, 40)
        with pytest.raises(InvalidParams, match="2\\*\\*40"):
            RhmParams(2, 2, 1, 41)

    def test_f_bounds(self):
        for v in range(2, 9):
            for s in (2, 3):
                for m in range(1, v ** (s - 1) + 1):
                    p = RhmParams(v, s, m, 1)
                    assert 0 < p.f_exact <= 1
                    assert abs(p.f_exact - p.f_approx) <= Fraction(1, v ** (s - 1))


class TestRuleSet:
    def test_deterministic(self, tiny_params):
        assert sample_ruleset(tiny_params, 7) == sample_ruleset(tiny_params, 7)
        a, b = sample_ruleset(tiny_params, 7), sample_ruleset(tiny_params, 7)
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a.tables, b.tables))

    def test_distinct_tuples(self, tiny_rules):
        for t in tiny_rules.tables:
            assert len({tuple(r) for r in t.reshape(-1, 2)}) == 6

    def test_uniform_tuples(self):
        # v=2, s=2, m=1: parent 1 gets each of the 4 tuples with prob 1/4
        p = RhmParams(2, 2, 1, 1)
        counts = {}
        for seed in range(10_000):
            key = tuple(sample_ruleset(p, seed).tables[0][0, 0])
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 4
        for c in counts.values():
            assert abs(c / 10_000 - 0.25) <= 0.02

    def test_productions_one_based(self, tiny_rules):
        prods = tiny_rules.productions(1, 1)
        assert len(prods) == 2
        assert all(1 <= x <= 3 for tup in prods for x in tup)

    def test_parent_of_inverse(self, tiny_rules):
        for ell in (1, 2):
            for y in range(3):
                for r in range(2):
                    assert tiny_rules.parent_of(ell, tiny_rules.tables[ell - 1][y, r]) == y
        used = {tuple(r) for r in tiny_rules.tables[0].reshape(-1, 2)}
        unused = [t for t in product(range(3), repeat=2) if t not in used]
        assert tiny_rules.parent_of(1, unused[0]) is None

    def test_json_roundtrip(self, tiny_rules):
        text = tiny_rules.to_json()
        assert RuleSet.from_json(text) == tiny_rules
        assert '"version": 1' in text

    def test_rejects_shared_production(self, tiny_params):
        t = np.zeros((3, 2, 2), dtype=int)
        with pytest.raises(ValueError, match="distinct"):
            RuleSet(tiny_params, (t, t))

    def test_tables_read_only(self, tiny_rules):
        with pytest.raises(ValueError):
            tiny_rules.tables[0][0, 0, 0] = 1


class TestGenerate:
    def test_consistent(self, rng):
        rules = sample_ruleset(RhmParams(8, 3, 4, 3), 1)
        for _ in range(20):
            s = random_sample(rules, rng)
            assert s.is_consistent(rules)
            assert [len(x) for x in s.values] == [27, 9, 3, 1]

    def test_m1_unique_string(self):
        rules = sample_ruleset(RhmParams(4, 2, 1, 3), 2)
        a = generate_sample(rules, 2, np.random.default_rng(0))
        b = generate_sample(rules, 2, np.random.default_rng(99))
        assert a == b
        assert a.class_label == 2

    def test_reachable_strings(self, tiny_rules):
        values = enumerate_derivations(tiny_rules)
        leaves, classes = values[0], values[-1][:, 0]
        per_class = [{tuple(x) for x in leaves[classes == c]} for c in range(3)]
        assert [len(s) for s in per_class] == [8, 8, 8]
        assert not (per_class[0] & per_class[1] or per_class[0] & per_class[2] or per_class[1] & per_class[2])

    def test_bad_class(self, tiny_rules, rng):
        with pytest.raises(ValueError):
            generate_sample(tiny_rules, 0, rng)

    def test_sample_json_roundtrip(self, tiny_rules, rng):
        s = random_sample(tiny_rules, rng)
        back = SampleTree.from_json(s.to_json(), tiny_rules.params)
        assert back == s


class TestEncoding:
    def test_example(self):
        rules = RuleSet(RhmParams(2, 2, 1, 1), (np.array([[[0, 1]], [[1, 1]]]),))
        s = generate_sample(rules, 1, np.random.default_rng(0))
        assert s.leaves.tolist() == [1, 2]
        assert encode_onehot(s).tolist() == [[1, 0], [0, 1]]

    def test_roundtrip(self, tiny_rules, rng):
        for _ in range(10):
            s = random_sample(tiny_rules, rng)
            enc = encode_onehot(s)
            assert np.all(enc.sum(axis=1) == 1)
            assert np.array_equal(decode_onehot(enc), s.leaves)


class TestCounting:
    def test_values(self):
        assert count_data_per_class(RhmParams(3, 2, 2, 2)) == 8
        assert count_data_per_class(RhmParams(5, 3, 1, 4)) == 1
        assert count_data_per_class(RhmParams(32, 2, 8, 10)) == 8**1023
