"""Gradient-based MCMC with velocity-norm-preserving dynamics, a Langevin
variant, an HMC baseline, automatic tuning, and a benchmark harness."""

__version__ = "0.1.0"

from .config import ChainState, KernelConfig
from .dynamics import (
    EnergyDelta,
    PhasePoint,
    leapfrog_step,
    micro_divergence,
    position_update,
    time_reverse,
    velocity_update_hmc,
    velocity_update_micro,
)
from .errors import (
    ConfigurationError,
    DegenerateSeriesError,
    DivergenceError,
    MamsError,
    TuningFailureError,
)
from .hmc import hmc_step
from .langevin import LangevinConfig, malt_sample_step, obabo_step, partial_refresh
from .proposal import (
    ProposalOutcome,
    TrajectorySchedule,
    draw_steps,
    mh_step,
    propose,
    refresh_velocity,
)
from .targets import (
    CountingTarget,
    GroundTruth,
    ModelSpec,
    TargetDensity,
    build_banana,
    build_bimodal,
    build_cauchy,
    build_funnel,
    build_gaussian,
    build_rosenbrock,
    build_standard_gaussian,
    make_model,
    precondition,
)
from .diagnostics import (
    BiasCurve,
    MomentTracker,
    b_squared,
    gradients_to_threshold,
    harmonic_mean_tau,
    tau_int,
)
from .adaptation import (
    AlbaState,
    DualAveragingState,
    TuningSchedule,
    alba_update,
    continuous_malt_ess,
    dual_averaging_update,
    estimate_preconditioner,
    run_tuning,
)
from .harness import (
    ExperimentConfig,
    RunResult,
    grid_search_traj_length,
    load_config,
    run_experiment,
    save_config,
)
from .sampler import init_chain_state, kernel_step, make_schedule

__all__ = [name for name in dir() if not name.startswith("_")]
