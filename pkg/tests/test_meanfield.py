from fractions import Fraction

import numpy as np
import pytest

from rhmlab import meanfield as mf
from rhmlab.grammar import RhmParams

P = RhmParams(32, 2, 8, 10)


def exact_f_up(p, params):
    """Rational evaluation of the upward map (independent of numpy)."""
    v, s, m = params.v, params.s, params.m
    f = params.f_exact
    ps = p**s
    return (ps + f * (m - 1) / (m * v - 1) * (1 - ps)) / (ps + f * (1 - ps))


def exact_f_down(q, p, params):
    v, s, m = params.v, params.s, params.m
    f = params.f_exact
    mix = f * (m - q) / (m * v - 1)
    num = q * p ** (s - 1) + mix * (1 - p ** (s - 1))
    return num / (num + (v - 1) * mix)


class TestUpMap:
    def test_fixed_points(self):
        assert mf.f_up(1.0, P) == 1.0
        assert abs(mf.f_up(1 / 32, P) - 1 / 32) < 1e-15

    def test_regression_value(self):
        # frozen from the rational oracle: 20749/21927
        assert exact_f_up(Fraction(9, 10), P) == Fraction(20749, 21927)
        assert float(mf.f_up(0.9, P)) == pytest.approx(20749 / 21927, abs=1e-15)

    def test_derivative_at_one(self):
        assert mf.slope_at_one(P) == Fraction(496, 1023)
        assert float(mf.f_up_derivative(1.0, P)) == pytest.approx(496 / 1023, abs=1e-15)

    def test_derivative_finite_difference(self):
        h = 1e-5
        for p in np.random.default_rng(0).uniform(1 / 32 + h, 1 - h, 20):
            fd = (mf.f_up(p + h, P) - mf.f_up(p - h, P)) / (2 * h)
            assert abs(fd - mf.f_up_derivative(p, P)) < 1e-6

    def test_threshold_identity(self):
        for v, s, m in [(32, 2, 8), (32, 2, 16), (3, 2, 2), (7, 3, 5)]:
            p = RhmParams(v, s, m, 1)
            assert mf.slope_at_one(p) == p.f_exact * s * m * (v - 1) / (m * v - 1)
            assert mf.is_bistable(p) == (mf.slope_at_one(p) < 1)


class TestDownMap:
    def test_perfect_information(self):
        # the annealed map keeps the (v-1) f (m-1)/(mv-1) wrong-symbol mass
        # even with a certain parent and certain siblings
        assert exact_f_down(Fraction(1), Fraction(1), P) == Fraction(33, 40)
        assert float(mf.f_down(1.0, 1.0, P)) == pytest.approx(0.825, abs=1e-15)

    def test_regression_value(self):
        assert exact_f_down(Fraction(1, 2), Fraction(1), P) == Fraction(11, 16)
        assert float(mf.f_down(0.5, 1.0, P)) == pytest.approx(0.6875, abs=1e-15)

    def test_uniform_point(self):
        # q = p = 1/v is not mapped to 1/v by this map; the exact value at
        # (v=3, s=2, m=2) is 3/8
        p = RhmParams(3, 2, 2, 1)
        assert exact_f_down(Fraction(1, 3), Fraction(1, 3), p) == Fraction(3, 8)
        assert float(mf.f_down(1 / 3, 1 / 3, p)) == pytest.approx(0.375, abs=1e-15)


class TestCombine:
    def test_values(self):
        assert mf.combine_marginal(1.0, 0.3, 32) == 1.0
        assert mf.combine_marginal(1 / 32, 1 / 32, 32) == pytest.approx(1 / 32, abs=1e-15)
        assert mf.combine_marginal(0.9, 0.5, 32) == pytest.approx(0.45 / (0.45 + 0.1 * 0.5 / 31), abs=1e-15)


class TestProfiles:
    def test_eps0(self):
        st = mf.iterate_profiles(0.0, P)
        assert np.all(st.p_up == 1.0) and st.p[0] == 1.0

    def test_eps1(self):
        st = mf.iterate_profiles(1.0, P)
        assert np.allclose(st.p_up, 1 / 32, atol=1e-15)
        assert st.p_down[-1] == 1 / 32

    def test_range(self):
        for eps in np.linspace(0, 1, 21):
            st = mf.iterate_profiles(eps, P)
            for arr in (st.p_up, st.p_down, st.p):
                assert arr.min() >= 1 / 32 - 1e-12 and arr.max() <= 1 + 1e-12


class TestFixedPoints:
    def test_fig5_bistable(self):
        rep = mf.fixed_points(P)
        assert rep.regime == "bistable"
        # interior root of the cubic (f - 1) p^3 + (1 - a) p^2 - f p + a,
        # from the product of roots with 1 and 1/v known: 7/24
        assert rep.interior == pytest.approx(7 / 24, abs=1e-13)
        assert abs(mf.f_up(rep.interior, P) - rep.interior) < 1e-12
        assert [s for _, s in rep.points] == ["attractive", "repulsive", "attractive"]

    def test_deep_branching_bistable(self):
        p = RhmParams(32, 4, 8, 1)
        assert p.f_exact == Fraction(255, 32**4 - 1)
        assert mf.fixed_points(p).regime == "bistable"

    def test_single_basin(self):
        rep = mf.fixed_points(RhmParams(32, 2, 32, 1))
        assert rep.regime == "single-basin" and rep.interior is None
        assert rep.points == ((1 / 32, "attractive"), (1.0, "repulsive"))

    def test_recoverable(self):
        rep = mf.fixed_points(RhmParams(5, 2, 1, 1))
        assert rep.regime == "recoverable"
        assert rep.points[0][1] == "repulsive"
        assert mf.critical_epsilon(RhmParams(5, 2, 1, 1)) == 1.0


class TestCriticalEpsilon:
    def test_fig5_value(self):
        # (1 - 7/24) * 32/31 = 68/93
        assert mf.critical_epsilon(P) == pytest.approx(68 / 93, abs=1e-12)

    def test_finite_depth(self):
        e = mf.critical_epsilon(P, L=10)
        assert abs(e - 0.75) < 1e-12

    def test_closing_region(self):
        # eps* shrinks towards 0 as s m (v-1) approaches v^s - 1
        eps =[mf.critical_epsilon(RhmParams(32, 2, m, 1)) for m in (8, 12, 15, 16)]
        assert all(a > b for a, b in zip(eps, eps[1:]))
        assert eps[-1] < 0.1

    def test_not_bistable(self):
        with pytest.raises(mf.NotBistable):
            mf.critical_epsilon(RhmParams(32, 2, 17, 1))


class TestPhaseDiagram:
    def test_rows(self):
        rows = mf.phase_diagram(16, 2, [2, 8], [0.0, 0.5, 1.0], L=4, trials=2, seed=0)
        assert [r["m"] for r in rows] == [2, 2, 2, 8, 8, 8]
        assert rows[0]["inference_theory"] and rows[0]["inference_bp"]
        assert rows[3]["sf"] == 1.0
        assert not rows[-1]["inference_theory"] and not rows[-1]["inference_bp"]

    def test_inference_rule(self):
        assert mf.inference_holds(1.0, 0.0, 32)
        assert not mf.inference_holds(1 / 32, 1.0, 32)
        assert mf.inference_holds(0.6, 0.5, 32)
        assert not mf.inference_holds(0.5, 0.5, 32)

    def test_iteration_map(self):
        p, fp = mf.iteration_map(P, n=11)
        assert p[0] == 1 / 32 and p[-1] == 1.0 and len(fp) == 11
