"""Trajectory-length randomization, the deterministic proposal, and the
Metropolis step for the microcanonical sampler.

A proposal runs n leapfrog steps followed by a velocity flip; its rejection
weight is the accumulated energy error of the trajectory, and the flip makes
the map an involution so the accept rule min(1, e^{-work}) is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ChainState, KernelConfig
from .dynamics import MICRO, PhasePoint, leapfrog_step, time_reverse
from .errors import ConfigurationError, DivergenceError

Array = np.ndarray


def halton_base2(index: int) -> float:
    """The index-th element (index >= 1) of the base-2 van der Corput sequence."""
    result = 0.0
    f = 0.5
    k = index
    while k > 0:
        result += f * (k & 1)
        k >>= 1
        f *= 0.5
    return result


def corrected_scale(avg_steps: float) -> float:
    """Scale y such that ceil(y*h), h ~ U(0,1), has mean exactly avg_steps.

    The mean of ceil(y*h) is (floor(y)+1) * (y - floor(y)/2) / y; the closed
    form below inverts that, with a bisection fallback if the floor guess is
    inconsistent.
    """
    m = float(avg_steps)
    if m < 1.0:
        raise ConfigurationError(f"average step count must be >= 1, got {m}")
    if m == 1.0:
        return 1.0
    whole = math.floor(2.0 * m - 1.0)
    y = whole * (whole + 1) / (2.0 * (whole + 1 - m))
    if math.floor(y) == whole:
        return y
    # Fallback: the mean is continuous and strictly increasing in y.
    lo, hi = 1.0, 2.0 * m + 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _ceil_mean(mid) < m:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _ceil_mean(y: float) -> float:
    w = math.floor(y)
    return (w + 1) * (y - w / 2.0) / y


@dataclass
class TrajectorySchedule:
    """Step-count source for proposals.

    ``halton`` walks the base-2 low-discrepancy sequence (one element per
    proposal), ``uniform`` draws h fresh, ``fixed`` always returns
    round(avg_steps).
    """

    avg_steps: float
    kind: str = "halton"
    halton_index: int = 1

    def __post_init__(self):
        if self.kind not in ("halton", "uniform", "fixed"):
            raise ConfigurationError(f"unknown sequence kind {self.kind!r}")
        if self.avg_steps < 1.0:
            raise ConfigurationError(
                f"average step count must be >= 1, got {self.avg_steps}"
            )
        self.scale = corrected_scale(self.avg_steps)

    def retarget(self, avg_steps: float) -> None:
        """Change the mean step count without restarting the sequence."""
        if avg_steps < 1.0:
            raise ConfigurationError(
                f"average step count must be >= 1, got {avg_steps}"
            )
        self.avg_steps = avg_steps
        self.scale = corrected_scale(avg_steps)


def draw_steps(sched: TrajectorySchedule, rng: np.random.Generator) -> int:
    """Number of leapfrog steps for the next proposal (always >= 1)."""
    if sched.kind == "fixed":
        return max(1, round(sched.avg_steps))
    if sched.kind == "halton":
        h = halton_base2(sched.halton_index)
        sched.halton_index += 1
    else:
        h = rng.uniform()
    return max(1, math.ceil(sched.scale * h))


def refresh_velocity(dim: int, rng: np.random.Generator) -> Array:
    """Uniform draw on the unit sphere."""
    if dim < 2:
        raise ConfigurationError("velocity refresh needs dim >= 2")
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm


@dataclass
class ProposalOutcome:
    """Result of one deterministic proposal plus the Metropolis decision."""

    end_state: PhasePoint
    work: float
    steps_taken: int
    accepted: bool
    grad_calls: int
    divergent: bool = False


def propose(
    z: PhasePoint,
    step_size: float,
    n_steps: int,
    target,
    flavor: str = MICRO,
    grad: Optional[Array] = None,
    nlogp: Optional[float] = None,
) -> tuple[ProposalOutcome, Optional[Array], Optional[float]]:
    """Apply n leapfrog steps and a final velocity flip, accumulating the
    energy error.

    Returns the pre-decision outcome plus the cached gradient and negative
    log density at the end position (None when the trajectory diverged).
    A divergent trajectory is reported with infinite work, never raised.
    """
    if n_steps < 1:
        raise ConfigurationError(f"proposal needs n_steps >= 1, got {n_steps}")
    work = 0.0
    state = z
    evals = 0
    for _ in range(n_steps):
        try:
            res = leapfrog_step(state, step_size, target, flavor, grad, nlogp)
        except DivergenceError as err:
            evals += getattr(err, "grad_evals", 0)
            return (
                ProposalOutcome(z, math.inf, n_steps, False, evals, divergent=True),
                None,
                None,
            )
        state, grad, nlogp = res.state, res.grad, res.nlogp
        evals += res.grad_evals
        work += res.energy.delta_v + res.energy.delta_k
    if not math.isfinite(work):
        return ProposalOutcome(z, math.inf, n_steps, False, evals, divergent=True), None, None
    return ProposalOutcome(time_reverse(state), work, n_steps, False, evals), grad, nlogp


def mh_step(
    state: ChainState,
    cfg: KernelConfig,
    target,
    rng: np.random.Generator,
    sched: TrajectorySchedule,
    adjusted: bool = True,
) -> tuple[ChainState, ProposalOutcome]:
    """One Metropolis-adjusted sample: randomized-length trajectory, accept
    with probability min(1, e^{-work}), then full velocity refreshment.

    Draw order: step count (uniform kind only), accept uniform, velocity
    refresh. With ``adjusted=False`` the proposal is always taken and no
    accept uniform is drawn (used to demonstrate the uncorrected bias).
    """
    n = draw_steps(sched, rng)
    out, grad_end, nlogp_end = propose(
        PhasePoint(state.x, state.u),
        cfg.step_size,
        n,
        target,
        MICRO,
        state.grad,
        state.nlogp,
    )
    if adjusted:
        # One accept uniform per proposal, drawn unconditionally so the
        # stream stays aligned with the Langevin kernel's.
        u_accept = rng.uniform()
        if out.divergent:
            accepted = False
        else:
            accepted = out.work <= 0.0 or u_accept < math.exp(-out.work)
    else:
        accepted = not out.divergent
    out.accepted = accepted
    if accepted:
        x_new, grad_new, nlogp_new = out.end_state.x, grad_end, nlogp_end
    else:
        x_new, grad_new, nlogp_new = state.x, state.grad, state.nlogp
    u_new = refresh_velocity(x_new.size, rng)
    new_state = ChainState(
        x=x_new,
        u=u_new,
        grad_calls=state.grad_calls + out.grad_calls,
        grad=grad_new,
        nlogp=nlogp_new,
    )
    return new_state, out
