"""Annealed mean-field theory of BP on the hierarchy.

All maps act on the belief ``p`` in the correct symbol and use
``f = (m v - 1) / (v**s - 1)``.  They accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import bisect

from .grammar import RhmParams

BRACKET_PAD = 1e-9
RESIDUAL_TOL = 1e-12


class NotBistable(ValueError):
    """F'(1) >= 1: the class is never recoverable at depth."""


def _consts(params: RhmParams):
    f = float(params.f_exact)
    return params.v, params.s, params.m, f


def f_up(p, params: RhmParams):
    v, s, m, f = _consts(params)
    ps = np.asarray(p, dtype=float) ** s
    return (ps + f * (m - 1) / (m * v - 1) * (1 - ps)) / (ps + f * (1 - ps))


def f_up_derivative(p, params: RhmParams):
    v, s, m, f = _consts(params)
    p = np.asarray(p, dtype=float)
    den = p**s + f * (1 - p**s)
    return m * (v - 1) / (m * v - 1) * f * s * p ** (s - 1) / den**2


def f_down(q, p, params: RhmParams):
    v, s, m, f = _consts(params)
    q = np.asarray(q, dtype=float)
    ps1 = np.asarray(p, dtype=float) ** (s - 1)
    mix = f * (m - q) / (m * v - 1)
    num = q * ps1 + mix * (1 - ps1)
    return num / (num + (v - 1) * mix)


def combine_marginal(p_up, p_down, v):
    p_up = np.asarray(p_up, dtype=float)
    p_down = np.asarray(p_down, dtype=float)
    both = p_up * p_down
    return both / (both + (1 - p_up) * (1 - p_down) / (v - 1))


def init_belief(eps, v):
    return 1.0 - np.asarray(eps, dtype=float) + np.asarray(eps, dtype=float) / v


def slope_at_one(params: RhmParams) -> Fraction:
    """F'(1) as an exact rational: ``s m (v-1) / (v**s - 1)``."""
    return Fraction(params.s * params.m * (params.v - 1), params.v**params.s - 1)


def is_bistable(params: RhmParams) -> bool:
    """True when p = 1 is attractive, i.e. F'(1) < 1."""
    return slope_at_one(params) < 1


@dataclass(frozen=True, eq=False)
class MeanFieldState:
    eps: float
    p_up: np.ndarray
    p_down: np.ndarray
    p: np.ndarray


def iterate_profiles(eps: float, params: RhmParams) -> MeanFieldState:
    """Upward recursion from the leaf belief, then downward from a uniform
    root; index ``l`` of each array is layer ``l``."""
    L, v = params.L, params.v
    up = np.empty(L + 1)
    up[0] = init_belief(eps, v)
    for ell in range(L):
        up[ell + 1] = f_up(up[ell], params)
    down = np.empty(L + 1)
    down[L] = 1.0 / v
    for ell in range(L - 1, -1, -1):
        down[ell] = f_down(down[ell + 1], up[ell], params)
    return MeanFieldState(float(eps), up, down, combine_marginal(up, down, v))


def class_belief(eps, params: RhmParams, L: int | None = None):
    """L-fold iterate of the upward map from the leaf belief."""
    p = init_belief(eps, params.v)
    for _ in range(params.L if L is None else L):
        p = f_up(p, params)
    return p


@dataclass(frozen=True)
class FixedPointReport:
    """Fixed points of the upward map on ``[1/v, 1]``.

    ``regime`` is ``"single-basin"`` when F'(1) >= 1 (only 1/v attracts),
    ``"bistable"`` when an interior repulsive point separates the basins of
    1/v and 1, and ``"recoverable"`` when F'(1) < 1 but 1/v is itself
    repulsive, so every p > 1/v flows to 1 (small m with large s).
    """

    points: tuple  # ((p*, "attractive" | "repulsive"), ...) in increasing p
    regime: str
    interior: float | None
    slope_at_one: Fraction


def _stability(p, params):
    return "attractive" if abs(float(f_up_derivative(p, params))) < 1 else "repulsive"


def fixed_points(params: RhmParams) -> FixedPointReport:
    lo, hi = 1.0 / params.v, 1.0
    slope = slope_at_one(params)
    interior = None
    regime = "single-basin"
    if slope < 1:
        g = lambda p: float(f_up(p, params)) - p  # noqa: E731
        a, b = lo + BRACKET_PAD, hi - BRACKET_PAD
        if g(a) < 0:
            interior = bisect(g, a, b, xtol=1e-16, rtol=1e-15, maxiter=200)
            if abs(g(interior)) >= RESIDUAL_TOL:
                raise ArithmeticError(f"bisection residual {g(interior)} above tolerance")
            regime = "bistable"
        else:
            regime = "recoverable"
    pts = [(lo, _stability(lo, params))]
    if interior is not None:
        pts.append((interior, _stability(interior, params)))
    # F'(1) is known exactly; avoid float round-off at the regime boundary
    pts.append((hi, "attractive" if slope < 1 else "repulsive"))
    return FixedPointReport(tuple(pts), regime, interior, slope)


def critical_epsilon(params: RhmParams, L: int | None = None, eps_grid=None) -> float:
    """Noise threshold for class inference.

    With ``L=None`` the infinite-depth value from the separatrix (1 when
    there is no separatrix and 1/v repels).  With a finite ``L``, the
    smallest grid value at which the L-fold upward iterate no longer
    exceeds the leaf belief.
    """
    report = fixed_points(params)
    if report.regime == "single-basin":
        raise NotBistable(f"F'(1) = {report.slope_at_one} >= 1")
    v = params.v
    if L is None:
        if report.interior is None:
            return 1.0
        return (1.0 - report.interior) * v / (v - 1)
    grid = np.arange(0.0, 1.0 + 1e-12, 0.05) if eps_grid is None else np.asarray(eps_grid)
    for eps in grid:
        if not inference_holds(class_belief(eps, params, L), eps, v):
            return float(eps)
    return float("nan")


def inference_holds(class_p, eps, v, margin=1e-12) -> bool:
    """Class inferred iff its belief beats the leaf initialisation belief.

    Exact reconstruction (belief 1, which at eps = 0 equals the leaf belief)
    also counts as inference.
    """
    return bool(class_p >= 1.0 - margin or class_p > init_belief(eps, v) + margin)


def iteration_map(params: RhmParams, n=201):
    p = np.linspace(1.0 / params.v, 1.0, n)
    return p, f_up(p, params)


def phase_diagram(v, s, m_list, eps_grid, L, trials, seed=0):
    """Theory and BP verdicts on an (sf, eps) grid; one dict per cell."""
    from .experiments import phase_cell

    rows = []
    for m in m_list:
        params = RhmParams(v, s, m, L)
        for eps in eps_grid:
            bp_vals = [phase_cell(params, eps, trial, seed)["bp_class_p"] for trial in range(trials)]
            rows.append(phase_row(params, eps, float(np.mean(bp_vals)), trials, seed))
    return rows


def phase_row(params: RhmParams, eps, bp_class_p, trials, seed):
    theory = float(class_belief(eps, params))
    return {
        "sf": float(params.s * params.f_approx),
        "m": params.m,
        "eps": float(eps),
        "theory_class_p": theory,
        "bp_class_p": bp_class_p,
        "inference_theory": inference_holds(theory, eps, params.v),
        "inference_bp": inference_holds(bp_class_p, eps, params.v),
        "trials": trials,
        "seed": seed,
    }
