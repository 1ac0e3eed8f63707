"""Plain Hamiltonian Monte Carlo baseline.

Shares the trajectory-length randomization and Metropolis bookkeeping with
the microcanonical sampler; only the velocity update and kinetic energy
differ, and the velocity is a fresh standard normal per proposal.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ChainState, KernelConfig
from .dynamics import HMC, PhasePoint
from .proposal import ProposalOutcome, TrajectorySchedule, draw_steps, propose


def hmc_step(
    state: ChainState,
    cfg: KernelConfig,
    target,
    rng: np.random.Generator,
    sched: TrajectorySchedule,
) -> tuple[ChainState, ProposalOutcome]:
    """One HMC sample: Gaussian velocity, leapfrog trajectory, Metropolis
    accept on the accumulated energy error.

    Draw order: velocity normals, step count (uniform kind only), accept
    uniform.
    """
    u = rng.standard_normal(state.x.size)
    n = draw_steps(sched, rng)
    out, grad_end, nlogp_end = propose(
        PhasePoint(state.x, u),
        cfg.step_size,
        n,
        target,
        HMC,
        state.grad,
        state.nlogp,
    )
    u_accept = rng.uniform()
    if out.divergent:
        accepted = False
    else:
        accepted = out.work <= 0.0 or u_accept < math.exp(-out.work)
    out.accepted = accepted
    if accepted:
        x_new, grad_new, nlogp_new = out.end_state.x, grad_end, nlogp_end
    else:
        x_new, grad_new, nlogp_new = state.x, state.grad, state.nlogp
    new_state = ChainState(
        x=x_new,
        u=np.zeros_like(state.u),
        grad_calls=state.grad_calls + out.grad_calls,
        grad=grad_new,
        nlogp=nlogp_new,
    )
    return new_state, out
