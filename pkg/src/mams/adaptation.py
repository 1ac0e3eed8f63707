"""Automatic hyperparameter tuning.

Three stages, each on a fixed slice of the gradient budget: dual-averaging
drives the step size to a target acceptance rate, per-coordinate standard
deviations give a diagonal preconditioner, and the trajectory length is set
from the measured decorrelation time of the chain. A closed-form
continuous-time efficiency model for noisy trajectories on Gaussian targets
is included as a utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .config import (
    ChainState,
    KernelConfig,
    PARTIAL_REFRESH_RATIO,
    SAMPLER_HMC,
    SAMPLER_MAMS_LANGEVIN,
)
from .diagnostics import harmonic_mean_tau, tau_int
from .dynamics import HMC, MICRO, PhasePoint, leapfrog_step
from .errors import (
    ConfigurationError,
    DegenerateSeriesError,
    DivergenceError,
    TuningFailureError,
)
from .proposal import refresh_velocity
from .sampler import init_chain_state, kernel_step, make_schedule
from .targets import CountingTarget, precondition

Array = np.ndarray

# Trajectory-length multipliers calibrated on Gaussian targets: plain
# randomized-length trajectories vs. trajectories with Langevin noise.
ALBA_COEFF_PLAIN = 0.3
ALBA_COEFF_LANGEVIN = 0.23

STEP_SIZE_FLOOR = 1e-10


def alba_coefficient(flavor: str) -> float:
    return ALBA_COEFF_LANGEVIN if flavor == SAMPLER_MAMS_LANGEVIN else ALBA_COEFF_PLAIN


@dataclass(frozen=True)
class DualAveragingState:
    """Stochastic-approximation state driving log step size to a target
    acceptance rate (standard gains: gamma 0.05, t0 10, kappa 0.75)."""

    log_eps: float
    log_eps_avg: float
    h_avg: float
    iteration: int
    target_accept: float
    shrink_center: float
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75

    @classmethod
    def start(cls, step_size: float, target_accept: float) -> "DualAveragingState":
        log_eps = math.log(step_size)
        return cls(
            log_eps=log_eps,
            log_eps_avg=log_eps,
            h_avg=0.0,
            iteration=0,
            target_accept=target_accept,
            shrink_center=math.log(10.0 * step_size),
        )

    @property
    def step_size(self) -> float:
        return math.exp(self.log_eps)

    @property
    def averaged_step_size(self) -> float:
        return math.exp(self.log_eps_avg)


def dual_averaging_update(state: DualAveragingState, accept_prob: float) -> DualAveragingState:
    """One update with the latest acceptance statistic (use the actual
    min(1, e^{-work}), not the binary accept flag)."""
    if not 0.0 <= accept_prob <= 1.0:
        raise ValueError(f"acceptance statistic must be in [0,1], got {accept_prob}")
    t = state.iteration + 1
    w = 1.0 / (t + state.t0)
    h_avg = (1.0 - w) * state.h_avg + w * (state.target_accept - accept_prob)
    log_eps = state.shrink_center - math.sqrt(t) / state.gamma * h_avg
    eta = t ** (-state.kappa)
    log_eps_avg = eta * log_eps + (1.0 - eta) * state.log_eps_avg
    return replace(
        state, log_eps=log_eps, log_eps_avg=log_eps_avg, h_avg=h_avg, iteration=t
    )


def estimate_preconditioner(samples: Array) -> Array:
    """Per-coordinate standard deviations, floored away from zero."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 100:
        raise ConfigurationError(
            f"need a (n >= 100, dim) sample matrix, got shape {samples.shape}"
        )
    return np.maximum(samples.std(axis=0), 1e-10)


@dataclass
class AlbaState:
    """Trajectory length plus the constant scaling it to the measured time
    between effective samples."""

    traj_length: float
    coeff: float
    stale: bool = False  # last window was too correlated to trust

    def __post_init__(self):
        if not self.traj_length > 0:
            raise ConfigurationError("trajectory length must stay positive")


def alba_update(state: AlbaState, chain_window: Array) -> AlbaState:
    """Rescale the trajectory length to the measured decorrelation time.

    The new length is coeff * current length * (harmonic mean over
    coordinates of the integrated autocorrelation time). Windows whose
    autocorrelation estimate exceeds a tenth of the window length are
    considered non-stationary: the length is held and the state flagged.
    """
    window = np.asarray(chain_window, dtype=float)
    if window.ndim != 2 or window.shape[0] < 200:
        raise ConfigurationError(
            f"need a (n >= 200, dim) window, got shape {window.shape}"
        )
    taus = []
    for j in range(window.shape[1]):
        try:
            taus.append(tau_int(window[:, j]))
        except DegenerateSeriesError:
            continue
    if not taus:
        return replace(state, stale=True)
    tau_bar = harmonic_mean_tau(taus)
    if tau_bar > window.shape[0] / 10.0:
        return replace(state, stale=True)
    return AlbaState(state.coeff * state.traj_length * tau_bar, state.coeff, stale=False)


@dataclass(frozen=True)
class TuningSchedule:
    """Gradient budget and per-stage fractions (step size, preconditioner,
    trajectory length)."""

    total_budget: int
    fractions: tuple = (0.1, 0.1, 0.1)

    def __post_init__(self):
        if self.total_budget < 0:
            raise ConfigurationError("budget must be non-negative")
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ConfigurationError("need three non-negative stage fractions")
        if sum(self.fractions) > 1.0 + 1e-12:
            raise ConfigurationError("stage fractions must sum to at most 1")

    def stage_budgets(self) -> tuple[int, int, int]:
        return tuple(int(f * self.total_budget) for f in self.fractions)


@dataclass
class TuningResult:
    config: KernelConfig
    scales: Array
    state: ChainState
    grad_calls: int
    accept_rate: float
    warnings: list = field(default_factory=list)


def initial_step_size(target, x0: Array, flavor: str, rng: np.random.Generator) -> float:
    """Halve from 1.0 until a single leapfrog step keeps the energy finite."""
    dyn_flavor = HMC if flavor == SAMPLER_HMC else MICRO
    d = x0.size
    eps = 1.0
    for _ in range(60):
        if dyn_flavor == HMC:
            u = rng.standard_normal(d)
        else:
            u = refresh_velocity(d, rng)
        try:
            leapfrog_step(PhasePoint(x0, u), eps, target, dyn_flavor)
            return eps
        except DivergenceError:
            eps /= 2.0
    raise TuningFailureError("no stable step size found down to 1e-18")


def _proposal_cost_cap(cfg: KernelConfig) -> int:
    # Largest gradient cost one proposal can incur under the schedule.
    sched_max = math.ceil(cfg.avg_steps * 2.0) + 1
    return sched_max + 1


def _clamped_steps(traj_length: float, step_size: float) -> float:
    return max(traj_length / step_size, 1.0)


def _dual_average_loop(state, cfg, work, counter, rng, limit, collect):
    """Dual-average the step size until the next proposal would exceed the
    gradient-call limit. Returns (state, cfg with frozen step size,
    positions, acceptance statistics)."""
    da = DualAveragingState.start(cfg.step_size, cfg.target_accept)
    sched = make_schedule(cfg)
    positions = []
    stats = []
    while True:
        cfg_live = replace(cfg, step_size=da.step_size)
        if counter.grad_calls + _proposal_cost_cap(cfg_live) > limit:
            break
        sched.retarget(_clamped_steps(cfg_live.traj_length, cfg_live.step_size))
        state, out = kernel_step(state, cfg_live, work, rng, sched)
        stat = 0.0 if out.divergent else min(1.0, math.exp(-max(out.work, 0.0)))
        da = dual_averaging_update(da, stat)
        stats.append(stat)
        if collect:
            positions.append(state.x.copy())
        if da.step_size < STEP_SIZE_FLOOR:
            raise TuningFailureError("step size collapsed during adaptation")
    frozen = max(da.averaged_step_size, STEP_SIZE_FLOOR)
    if stats:
        tail = stats[len(stats) // 2 :]
        if np.mean(tail) < 0.1 and frozen <= 2 * STEP_SIZE_FLOOR:
            raise TuningFailureError("acceptance stuck below 0.1 at the step-size floor")
    return state, replace(cfg, step_size=frozen), positions, stats


def _sampling_loop(state, cfg, work, counter, rng, limit):
    sched = make_schedule(cfg)
    positions = []
    stats = []
    cap = _proposal_cost_cap(cfg)
    while counter.grad_calls + cap <= limit:
        state, out = kernel_step(state, cfg, work, rng, sched)
        positions.append(state.x.copy())
        stats.append(0.0 if out.divergent else min(1.0, math.exp(-max(out.work, 0.0))))
    return state, positions, stats


def run_tuning(
    target,
    schedule: TuningSchedule,
    flavor: str,
    rng: np.random.Generator,
    target_accept: float = 0.9,
    x0: Optional[Array] = None,
    apply_preconditioning: bool = True,
    alba_rounds: int = 3,
) -> TuningResult:
    """Stage 1 tunes the step size at trajectory length sqrt(d); stage 2
    estimates a diagonal preconditioner from the stage-1 chain and re-tunes
    the step size; stage 3 alternates trajectory-length updates with short
    step-size re-tuning bursts.

    The returned warm state lives in the preconditioned coordinates; map
    positions back with ``scales * x``. Gradient spending is hard-capped at
    the scheduled stage budgets (plus the step-size probe).
    """
    counter = CountingTarget(target)
    work = counter  # kernels step on this; stage 2 may swap in a wrapper
    d = target.dim
    if x0 is None:
        x0 = rng.standard_normal(d)
    x0 = np.asarray(x0, dtype=float)
    b1, b2, b3 = schedule.stage_budgets()
    warnings: list[str] = []

    eps0 = initial_step_size(counter, x0, flavor, rng)
    probe_calls = counter.grad_calls
    cfg = KernelConfig(
        step_size=eps0,
        traj_length=math.sqrt(d),
        flavor=flavor,
        target_accept=target_accept,
        sequence_kind="fixed" if flavor == SAMPLER_MAMS_LANGEVIN else "halton",
    )
    state = init_chain_state(work, x0, rng)
    scales = np.ones(d)
    accept_tail: list[float] = []

    # Stage 1: step size at the default trajectory length.
    stage1_positions: list[Array] = []
    if b1 > 0:
        state, cfg, stage1_positions, stats = _dual_average_loop(
            state, cfg, work, counter, rng, counter.grad_calls + b1, collect=True
        )
        accept_tail = stats or accept_tail

    # Stage 2: diagonal preconditioner from the stage-1 chain, then re-tune
    # the step size in the rescaled coordinates.
    if b2 > 0:
        if apply_preconditioning and len(stage1_positions) >= 100:
            scales = estimate_preconditioner(np.asarray(stage1_positions))
            work = precondition(counter, scales)
            state = ChainState(x=state.x / scales, u=state.u)
        elif apply_preconditioning:
            warnings.append("stage 1 produced too few samples to precondition")
        state, cfg, _, stats = _dual_average_loop(
            state, cfg, work, counter, rng, counter.grad_calls + b2, collect=False
        )
        accept_tail = stats or accept_tail

    # Stage 3: trajectory length from the measured decorrelation time,
    # re-tuning the step size after each change.
    if b3 > 0 and alba_rounds > 0:
        alba = AlbaState(cfg.traj_length, alba_coefficient(flavor))
        round_budget = b3 // alba_rounds
        for _ in range(alba_rounds):
            window_limit = counter.grad_calls + int(round_budget * 0.75)
            state, positions, stats = _sampling_loop(
                state, cfg, work, counter, rng, window_limit
            )
            accept_tail = stats or accept_tail
            if len(positions) >= 200:
                alba = alba_update(alba, np.asarray(positions))
                if alba.stale:
                    warnings.append("held trajectory length: window too correlated")
            else:
                warnings.append("held trajectory length: window too short")
            cfg = replace(cfg, traj_length=alba.traj_length)
            burst_limit = counter.grad_calls + int(round_budget * 0.25)
            state, cfg, _, stats = _dual_average_loop(
                state, cfg, work, counter, rng, burst_limit, collect=False
            )
            accept_tail = stats or accept_tail

    if flavor == SAMPLER_MAMS_LANGEVIN:
        cfg = replace(cfg, partial_refresh_length=PARTIAL_REFRESH_RATIO * cfg.traj_length)

    assert counter.grad_calls <= probe_calls + b1 + b2 + b3, (
        f"tuning consumed {counter.grad_calls} gradient calls, "
        f"scheduled {probe_calls + b1 + b2 + b3}"
    )
    accept_rate = float(np.mean(accept_tail)) if accept_tail else 1.0
    return TuningResult(
        config=cfg,
        scales=scales,
        state=state,
        grad_calls=counter.grad_calls,
        accept_rate=accept_rate,
        warnings=warnings,
    )


def continuous_malt_ess(beta: float, horizon: float, sigma: float) -> float:
    """Closed-form effective-sample-size rate of continuous-time noisy
    trajectories on a Gaussian of scale sigma.

    ``beta`` is the damping (must satisfy beta < 1/sigma), ``horizon`` the
    trajectory duration.
    """
    if horizon <= 0.0:
        raise ValueError("trajectory duration must be positive")
    if beta < 0.0 or beta * sigma >= 1.0:
        raise ValueError("damping must satisfy 0 <= beta < 1/sigma")
    omega = math.sqrt(1.0 / sigma**2 - beta**2)
    rho = math.exp(-beta * horizon) * (
        math.cos(omega * horizon) + beta / omega * math.sin(omega * horizon)
    )
    return (1.0 - rho * rho) / (1.0 + rho * rho)


def worst_direction_ess(
    beta: float, horizon: float, sigma_max: float, n_sigma: int = 512
) -> float:
    """Minimum ESS rate over Gaussian scales in (0, sigma_max]."""
    sigmas = np.linspace(sigma_max / n_sigma, sigma_max, n_sigma)
    return min(continuous_malt_ess(beta, horizon, s) for s in sigmas)
