"""Uniform stepping interface over the three kernels."""

from __future__ import annotations

import numpy as np

from .config import (
    ChainState,
    KernelConfig,
    SAMPLER_HMC,
    SAMPLER_MAMS,
    SAMPLER_MAMS_LANGEVIN,
)
from .hmc import hmc_step
from .langevin import LangevinConfig, malt_sample_step
from .proposal import ProposalOutcome, TrajectorySchedule, mh_step, refresh_velocity


def make_schedule(cfg: KernelConfig) -> TrajectorySchedule:
    return TrajectorySchedule(avg_steps=cfg.avg_steps, kind=cfg.sequence_kind)


def langevin_config(cfg: KernelConfig) -> LangevinConfig:
    return LangevinConfig(
        step_size=cfg.step_size,
        steps_per_sample=max(1, round(cfg.avg_steps)),
        partial_refresh_length=cfg.resolved_partial_refresh(),
    )


def init_chain_state(target, x0, rng: np.random.Generator) -> ChainState:
    """Chain state at x0 with a fresh sphere velocity (ignored by HMC)."""
    x0 = np.asarray(x0, dtype=float)
    return ChainState(x=x0.copy(), u=refresh_velocity(x0.size, rng))


def kernel_step(
    state: ChainState,
    cfg: KernelConfig,
    target,
    rng: np.random.Generator,
    sched: TrajectorySchedule,
    adjusted: bool = True,
) -> tuple[ChainState, ProposalOutcome]:
    if cfg.flavor == SAMPLER_MAMS:
        return mh_step(state, cfg, target, rng, sched, adjusted=adjusted)
    if cfg.flavor == SAMPLER_HMC:
        return hmc_step(state, cfg, target, rng, sched)
    if cfg.flavor == SAMPLER_MAMS_LANGEVIN:
        lcfg = langevin_config(cfg)
        x, out, grad, nlogp = malt_sample_step(
            state.x, lcfg, target, rng, state.grad, state.nlogp
        )
        new_state = ChainState(
            x=x,
            u=state.u,
            grad_calls=state.grad_calls + out.grad_calls,
            grad=grad,
            nlogp=nlogp,
        )
        return new_state, out
    raise ValueError(f"unknown flavor {cfg.flavor!r}")
