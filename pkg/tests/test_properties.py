"""Property tests for the model invariants."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rhmlab import bp, gaussian, meanfield
from rhmlab.grammar import RhmParams, encode_onehot, decode_onehot, random_sample, sample_ruleset
from rhmlab.noise import DiffusionSchedule, bayes_leaf_beliefs, effective_epsilon, epsilon_beliefs
from rhmlab.oracle import brute_force_posterior


@st.composite
def params(draw, max_v=12, max_s=3, max_L=4):
    v = draw(st.integers(2, max_v))
    s = draw(st.integers(2, max_s))
    m = draw(st.integers(1, min(v ** (s - 1), 40)))
    L = draw(st.integers(1, max_L))
    assume(s**L <= 256)
    return RhmParams(v, s, m, L)


seeds = st.integers(0, 2**63 - 1)
unit = st.floats(0.0, 1.0)


class TestGrammarProperties:
    @given(params(), seeds)
    @settings(max_examples=60, deadline=None)
    def test_rules_distinct_and_complete(self, p, seed):
        rules = sample_ruleset(p, seed)
        for t in rules.tables:
            assert t.shape == (p.v, p.m, p.s)
            assert len({tuple(r) for r in t.reshape(-1, p.s)}) == p.m * p.v

    @given(params(), seeds)
    @settings(max_examples=60, deadline=None)
    def test_samples_consistent(self, p, seed):
        rules = sample_ruleset(p, seed)
        s = random_sample(rules, np.random.default_rng(seed))
        assert s.is_consistent(rules)
        assert [len(x) for x in s.values] == [p.s ** (p.L - ell) for ell in range(p.L + 1)]
        assert np.array_equal(decode_onehot(encode_onehot(s)), s.leaves)


class TestBeliefProperties:
    @given(st.integers(2, 40), st.integers(1, 50), st.floats(1e-3, 10.0), seeds)
    @settings(max_examples=60, deadline=None)
    def test_bayes_rows_and_shift(self, v, n, t, seed):
        x = np.random.default_rng(seed).normal(size=(n, v)) * 3
        sch = DiffusionSchedule()
        b = bayes_leaf_beliefs(x, sch, t).values
        assert np.all(b >= 0) and np.abs(b.sum(axis=1) - 1).max() < 1e-12
        shifted = bayes_leaf_beliefs(x + 7.5, sch, t).values
        assert np.abs(b - shifted).max() < 1e-12

    @given(st.integers(2, 40), unit, seeds)
    @settings(max_examples=60, deadline=None)
    def test_epsilon_roundtrip(self, v, eps, seed):
        truth = np.random.default_rng(seed).integers(0, v, 30)
        b = epsilon_beliefs(truth, eps, v=v)
        assert np.all(b.values[np.arange(30), truth] == 1 - eps + eps / v)
        assert abs(effective_epsilon(b, truth) - eps) < 1e-12


class TestBpProperties:
    @given(st.integers(0, 10**9), unit)
    @settings(max_examples=40, deadline=None)
    def test_matches_brute_force(self, seed, eps):
        p = RhmParams(3, 2, 2, 2)
        rules = sample_ruleset(p, seed)
        truth = random_sample(rules, np.random.default_rng(seed))
        b = epsilon_beliefs(truth, eps)
        ours = bp.node_marginals(bp.run_bp(rules, b))
        ref = brute_force_posterior(rules, b)["marginals"]
        assert max(np.abs(x - y).max() for x, y in zip(ours, ref)) < 1e-10

    @given(params(max_v=8), seeds)
    @settings(max_examples=40, deadline=None)
    def test_normalized_with_dirichlet_evidence(self, p, seed):
        rng = np.random.default_rng(seed)
        rules = sample_ruleset(p, seed)
        ms = bp.run_bp(rules, rng.dirichlet(np.ones(p.v), size=p.d))
        for msg in ms.up + ms.down:
            assert np.abs(msg.sum(axis=1) - 1).max() < 1e-12
        prof = bp.marginals(ms)
        assert np.all((prof.mean_max_marginal >= 1 / p.v - 1e-12) & (prof.mean_max_marginal <= 1 + 1e-12))


class TestMeanFieldProperties:
    @given(params(max_v=64, max_s=4, max_L=1), unit, unit)
    @settings(max_examples=200, deadline=None)
    def test_maps_stay_in_range(self, p, a, b):
        lo = 1 / p.v
        x, y = lo + (1 - lo) * a, lo + (1 - lo) * b
        up = float(meanfield.f_up(x, p))
        down = float(meanfield.f_down(x, y, p))
        assert lo - 1e-12 <= up <= 1 + 1e-12
        assert 0 < down <= 1 + 1e-12
        assert lo - 1e-12 <= float(meanfield.combine_marginal(x, y, p.v)) <= 1 + 1e-12

    @given(params(max_v=64, max_s=4, max_L=1))
    @settings(max_examples=100, deadline=None)
    def test_up_map_increasing_and_derivative(self, p):
        grid = np.linspace(1 / p.v, 1, 10_001)
        vals = meanfield.f_up(grid, p)
        assert np.all(np.diff(vals) > -1e-12)
        h = 1e-5
        inner = grid[(grid > 1 / p.v + h) & (grid < 1 - h)][::50]
        fd = (meanfield.f_up(inner + h, p) - meanfield.f_up(inner - h, p)) / (2 * h)
        exact = meanfield.f_up_derivative(inner, p)
        assert np.all(np.abs(fd - exact) < 1e-6 * (1 + np.abs(exact)))

    @given(params(max_v=64, max_s=4, max_L=1))
    @settings(max_examples=100, deadline=None)
    def test_fixed_point_report(self, p):
        rep = meanfield.fixed_points(p)
        assert (rep.regime == "single-basin") == (meanfield.slope_at_one(p) >= 1)
        for x, _ in rep.points:
            assert abs(float(meanfield.f_up(x, p)) - x) < 1e-12
        if rep.interior is not None:
            assert 1 / p.v < rep.interior < 1


class TestGaussianProperties:
    @given(st.integers(1, 1000), seeds)
    @settings(max_examples=50, deadline=None)
    def test_score_odd(self, t, seed):
        p = gaussian.MixtureParams(d=16)
        sched = gaussian.DiscreteSchedule.linear()
        x = np.random.default_rng(seed).normal(size=(4, 16)) * 3
        assert np.array_equal(gaussian.score(-x, t, p, sched), -gaussian.score(x, t, p, sched))
