"""Kernel configuration and per-chain state."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray

SAMPLER_MAMS = "mams"
SAMPLER_MAMS_LANGEVIN = "mams_langevin"
SAMPLER_HMC = "hmc"
SAMPLERS = (SAMPLER_MAMS, SAMPLER_MAMS_LANGEVIN, SAMPLER_HMC)

# Partial-refreshment length relative to the trajectory length, from the
# continuous-time worst-direction optimum (see adaptation.continuous_malt_ess).
PARTIAL_REFRESH_RATIO = 1.25


def default_target_accept(sampler: str) -> float:
    return 0.8 if sampler == SAMPLER_HMC else 0.9


def default_sequence_kind(sampler: str) -> str:
    # The Langevin variant runs a fixed step count per trajectory; the
    # others randomize the trajectory length.
    return "fixed" if sampler == SAMPLER_MAMS_LANGEVIN else "halton"


@dataclass(frozen=True)
class KernelConfig:
    """Frozen sampler hyperparameters."""

    step_size: float
    traj_length: float
    flavor: str = SAMPLER_MAMS
    target_accept: float = 0.9
    partial_refresh_length: Optional[float] = None  # Langevin flavor only
    sequence_kind: str = "halton"  # halton | uniform | fixed

    def __post_init__(self):
        if self.flavor not in SAMPLERS:
            raise ConfigurationError(f"unknown flavor {self.flavor!r}")
        if not (self.step_size > 0 and np.isfinite(self.step_size)):
            raise ConfigurationError(f"bad step size {self.step_size!r}")
        if not (self.traj_length > 0 and np.isfinite(self.traj_length)):
            raise ConfigurationError(f"bad trajectory length {self.traj_length!r}")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigurationError("target acceptance must lie in (0,1)")
        if self.sequence_kind not in ("halton", "uniform", "fixed"):
            raise ConfigurationError(f"unknown sequence kind {self.sequence_kind!r}")
        if self.partial_refresh_length is not None and not self.partial_refresh_length > 0:
            raise ConfigurationError("partial refresh length must be positive")

    @property
    def avg_steps(self) -> float:
        return max(self.traj_length / self.step_size, 1.0)

    def resolved_partial_refresh(self) -> float:
        if self.partial_refresh_length is not None:
            return self.partial_refresh_length
        return PARTIAL_REFRESH_RATIO * self.traj_length


@dataclass
class ChainState:
    """One chain's position, velocity, and gradient-call account.

    ``grad``/``nlogp`` cache the target evaluations at ``x`` so consecutive
    proposals do not re-evaluate the shared endpoint.
    """

    x: Array
    u: Array
    grad_calls: int = 0
    grad: Optional[Array] = None
    nlogp: Optional[float] = None

    def copy(self) -> "ChainState":
        return ChainState(
            self.x.copy(),
            self.u.copy(),
            self.grad_calls,
            None if self.grad is None else self.grad.copy(),
            self.nlogp,
        )
