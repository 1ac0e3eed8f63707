"""Microcanonical sampling with Langevin noise.

Each trajectory interleaves partial velocity refreshments (O) around the
deterministic leapfrog core (BAB); only the deterministic segments change
the energy, so the whole trajectory is accepted or rejected on their
accumulated error alone, with a fresh full velocity draw per trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import MICRO, PhasePoint, leapfrog_step
from .errors import ConfigurationError, DivergenceError
from .proposal import ProposalOutcome, refresh_velocity

Array = np.ndarray


@dataclass(frozen=True)
class LangevinConfig:
    """Step size, fixed steps per trajectory, and the partial-refresh scale."""

    step_size: float
    steps_per_sample: int
    partial_refresh_length: float

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigurationError(f"bad step size {self.step_size!r}")
        if self.steps_per_sample < 1:
            raise ConfigurationError("steps_per_sample must be >= 1")
        if not self.partial_refresh_length > 0:
            raise ConfigurationError("partial refresh length must be positive")

    @property
    def momentum_decay(self) -> float:
        """Velocity persistence per step, e^{-step/refresh_length}."""
        return math.exp(-self.step_size / self.partial_refresh_length)


def partial_refresh(u: Array, cfg: LangevinConfig, rng: np.random.Generator) -> Array:
    """Sphere-normalized mix of the current velocity with fresh noise.

    Consumes no randomness when the decay factor is exactly 1 (no noise),
    so noise-free runs stay stream-compatible with the plain sampler.
    """
    c1 = cfg.momentum_decay
    c2 = math.sqrt(max(0.0, 1.0 - c1 * c1))
    if c2 == 0.0:
        return u
    d = u.size
    v = c1 * u + c2 * rng.standard_normal(d) / math.sqrt(d)
    return v / np.linalg.norm(v)


def obabo_step(
    z: PhasePoint,
    cfg: LangevinConfig,
    target,
    rng: np.random.Generator,
    grad: Optional[Array] = None,
    nlogp: Optional[float] = None,
):
    """Partial refresh, leapfrog, partial refresh.

    Returns (state, energy_error, grad, nlogp, grad_evals); the energy error
    covers the deterministic core only.
    """
    u1 = partial_refresh(z.u, cfg, rng)
    res = leapfrog_step(PhasePoint(z.x, u1), cfg.step_size, target, MICRO, grad, nlogp)
    u2 = partial_refresh(res.state.u, cfg, rng)
    delta = res.energy.delta_v + res.energy.delta_k
    return PhasePoint(res.state.x, u2), delta, res.grad, res.nlogp, res.grad_evals


def malt_sample_step(
    x: Array,
    cfg: LangevinConfig,
    target,
    rng: np.random.Generator,
    grad: Optional[Array] = None,
    nlogp: Optional[float] = None,
) -> tuple[Array, ProposalOutcome, Optional[Array], Optional[float]]:
    """One position-marginal sample: fresh velocity, a fixed-length noisy
    trajectory, and a single accept/reject on the summed energy error.

    Draw order: velocity refresh, then per step (O noise, O noise), then the
    accept uniform. Returns the new position, the outcome, and the cached
    gradient/negative-log-density at that position.
    """
    u = refresh_velocity(x.size, rng)
    state = PhasePoint(x, u)
    total = 0.0
    evals = 0
    divergent = False
    step_grad, step_nlogp = grad, nlogp
    for _ in range(cfg.steps_per_sample):
        try:
            state, delta, step_grad, step_nlogp, e = obabo_step(
                state, cfg, target, rng, step_grad, step_nlogp
            )
        except DivergenceError as err:
            evals += getattr(err, "grad_evals", 0)
            divergent = True
            break
        evals += e
        total += delta
    u_accept = rng.uniform()
    if divergent or not math.isfinite(total):
        out = ProposalOutcome(
            PhasePoint(x, u), math.inf, cfg.steps_per_sample, False, evals, divergent=True
        )
        return x, out, grad, nlogp
    accepted = total <= 0.0 or u_accept < math.exp(-total)
    out = ProposalOutcome(state, total, cfg.steps_per_sample, accepted, evals)
    if accepted:
        return state.x, out, step_grad, step_nlogp
    return x, out, grad, nlogp
