"""Two-mode Gaussian mixture with exact score: forward-backward control run.

Time is discrete, ``t = 0..T``; ``alpha_bar[0] = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Equal-weight mixture of N(+mu, sigma^2 I) and N(-mu, sigma^2 I)."""

    d: int = 1024
    mu: np.ndarray | None = None
    sigma: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        mu = np.ones(self.d) if self.mu is None else np.asarray(self.mu, dtype=float)
        if mu.shape != (self.d,):
            raise ValueError(f"mu must have shape ({self.d},)")
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True, eq=False)
class DiscreteSchedule:
    betas: np.ndarray
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.concatenate([[0.0], np.asarray(self.betas, dtype=float)])
        if np.any(betas[1:] <= 0) or np.any(betas[1:] >= 1):
            raise ValueError("betas must lie in (0, 1)")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bar", np.cumprod(1.0 - betas))

    @property
    def T(self) -> int:
        return len(self.betas) - 1

    @classmethod
    def linear(cls, T=1000, beta_start=1e-4, beta_end=0.02):
        return cls(np.linspace(beta_start, beta_end, T))


def mixture_sample(params: MixtureParams, rng, n=None):
    """Draws of shape ``(d,)`` or ``(n, d)``; also returns the mode signs."""
    shape = (params.d,) if n is None else (n, params.d)
    signs = rng.choice([-1.0, 1.0], size=() if n is None else (n,))
    x = np.asarray(signs)[..., None] * params.mu + params.sigma * rng.standard_normal(shape)
    return x, signs


def _project(x, mu):
    return np.asarray(x, dtype=float) @ mu


def score(x, t, params: MixtureParams, schedule: DiscreteSchedule):
    ab = schedule.alpha_bar[t]
    c = ab * params.sigma**2 + 1.0 - ab
    gain = np.sqrt(ab) / c
    proj = _project(x, params.mu)
    return -np.asarray(x) / c + gain * np.tanh(gain * proj)[..., None] * params.mu


def log_density(x, t, params: MixtureParams, schedule: DiscreteSchedule):
    """Closed-form log q_t(x) of the diffused mixture."""
    ab = schedule.alpha_bar[t]
    c = ab * params.sigma**2 + 1.0 - ab
    shift = np.sqrt(ab) * params.mu
    x = np.asarray(x, dtype=float)
    a = -((x - shift) ** 2).sum(axis=-1) / (2 * c)
    b = -((x + shift) ** 2).sum(axis=-1) / (2 * c)
    return np.logaddexp(a, b) - np.log(2.0) - 0.5 * params.d * np.log(2 * np.pi * c)


def forward(x0, t, schedule: DiscreteSchedule, rng):
    ab = schedule.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * rng.standard_normal(np.shape(x0))


def backward_step(x_t, t, params: MixtureParams, schedule: DiscreteSchedule, rng):
    """``x_{t-1} = (x_t + beta_t * score) / sqrt(1 - beta_t) + sqrt(beta_t) z``."""
    beta = schedule.betas[t]
    drift = (x_t + beta * score(x_t, t, params, schedule)) / np.sqrt(1.0 - beta)
    return drift + np.sqrt(beta) * rng.standard_normal(np.shape(x_t))


def backward(x_t, t, params, schedule, rng):
    """Run :func:`backward_step` from ``t`` down to 0, in place on a copy.

    Consumes the generator exactly like repeated :func:`backward_step` calls.
    """
    x = np.array(x_t, dtype=float)
    noise = np.empty_like(x)
    mu, s2 = params.mu, params.sigma**2
    for k in range(t, 0, -1):
        beta, ab = schedule.betas[k], schedule.alpha_bar[k]
        c = ab * s2 + 1.0 - ab
        gain = np.sqrt(ab) / c
        root = np.sqrt(1.0 - beta)
        pull = beta * gain * np.tanh(gain * (x @ mu)) / root
        x *= (1.0 - beta / c) / root
        x += pull[..., None] * mu
        rng.standard_normal(out=noise)
        noise *= np.sqrt(beta)
        x += noise
    return x


def generate(params: MixtureParams, schedule: DiscreteSchedule, n, rng):
    x_T = rng.standard_normal((n, params.d))
    return backward(x_T, schedule.T, params, schedule, rng)


def mode_flips(t_invert, params: MixtureParams, schedule: DiscreteSchedule, n_trials, rng) -> int:
    """Number of trials whose mode sign changes after forward-to-t then
    exact backward."""
    if not 0 <= t_invert <= schedule.T:
        raise ValueError(f"t_invert must lie in 0..{schedule.T}")
    x0, _ = mixture_sample(params, rng, n_trials)
    x_hat = backward(forward(x0, t_invert, schedule, rng), t_invert, params, schedule, rng)
    return int(np.sum(np.sign(_project(x_hat, params.mu)) != np.sign(_project(x0, params.mu))))


def mode_flip_rate(t_invert, params: MixtureParams, schedule: DiscreteSchedule, n_trials, rng) -> float:
    return mode_flips(t_invert, params, schedule, n_trials, rng) / n_trials
