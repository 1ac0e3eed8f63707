"""Experiment orchestration: seeded chains, bias curves, CSV emission.

A run tunes once on a single chain, then launches N chains from the tuned
warm state with per-chain seeds (base seed + chain index). Chains execute
sequentially in chain order, so results are reproducible bit-for-bit from
the manifest regardless of scheduling.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .adaptation import TuningSchedule, run_tuning
from .config import (
    ChainState,
    KernelConfig,
    SAMPLERS,
    default_sequence_kind,
    default_target_accept,
)
from .diagnostics import (
    BiasCurve,
    MomentTracker,
    b_squared,
    geometric_grid,
    gradients_to_threshold,
    write_summary_csv,
    write_trace_csv,
)
from .errors import ConfigurationError
from .sampler import init_chain_state, kernel_step, make_schedule
from .targets import CountingTarget, make_model, precondition

Array = np.ndarray

# Offset separating the tuning stream from the chain streams.
TUNING_SEED_OFFSET = 997_001


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one (model, sampler) run."""

    model: str
    sampler: str
    model_params: dict = field(default_factory=dict)
    chains: int = 4
    budget: int = 50_000  # sampling gradient calls per chain, tuning excluded
    tuning_budget: Optional[int] = None  # default: equal to budget
    tuning_fractions: tuple = (0.1, 0.1, 0.1)
    target_accept: Optional[float] = None  # default depends on the sampler
    seed: int = 0
    out_dir: str = "results"
    reduction: str = "max"  # max | avg
    threshold: float = 0.01
    apply_preconditioning: bool = True
    adjusted: bool = True
    fixed_step_size: Optional[float] = None  # skip tuning when both fixed_*
    fixed_traj_length: Optional[float] = None
    sequence_kind: Optional[str] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ConfigurationError(
                f"unknown sampler {self.sampler!r}; choose from {SAMPLERS}"
            )
        if self.chains < 1:
            raise ConfigurationError("need at least one chain")
        if self.budget < 0:
            raise ConfigurationError("budget must be non-negative")
        if self.reduction not in ("max", "avg"):
            raise ConfigurationError("reduction must be 'max' or 'avg'")
        if (self.fixed_step_size is None) != (self.fixed_traj_length is None):
            raise ConfigurationError(
                "fixed_step_size and fixed_traj_length must be given together"
            )

    def resolved_target_accept(self) -> float:
        if self.target_accept is not None:
            return self.target_accept
        return default_target_accept(self.sampler)

    def resolved_sequence_kind(self) -> str:
        if self.sequence_kind is not None:
            return self.sequence_kind
        return default_sequence_kind(self.sampler)

    def run_label(self) -> str:
        return self.label or f"{self.model}_{self.sampler}"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["tuning_fractions"] = list(self.tuning_fractions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "tuning_fractions" in d:
            d["tuning_fractions"] = tuple(d["tuning_fractions"])
        return cls(**d)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class ChainRecord:
    curve: BiasCurve
    grad_calls: int
    proposals: int
    accepted: int
    divergences: int

    @property
    def accept_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0


@dataclass
class RunResult:
    config: ExperimentConfig
    kernel: KernelConfig
    scales: Array
    records: list
    gradients_to_threshold: Optional[int]
    out_dir: Optional[Path]
    tuning_grad_calls: int


def _tuning_rng(cfg: ExperimentConfig) -> np.random.Generator:
    return np.random.default_rng(cfg.seed + TUNING_SEED_OFFSET)


def chain_seed(cfg: ExperimentConfig, chain_idx: int) -> int:
    return cfg.seed + chain_idx


def prepare_kernel(cfg: ExperimentConfig, target):
    """Tune (or adopt fixed hyperparameters) and return
    (kernel config, scales, warm state, tuning gradient calls)."""
    rng = _tuning_rng(cfg)
    if cfg.fixed_step_size is not None:
        kernel = KernelConfig(
            step_size=cfg.fixed_step_size,
            traj_length=cfg.fixed_traj_length,
            flavor=cfg.sampler,
            target_accept=cfg.resolved_target_accept(),
            sequence_kind=cfg.resolved_sequence_kind(),
        )
        scales = np.ones(target.dim)
        warm = init_chain_state(target, rng.standard_normal(target.dim), rng)
        return kernel, scales, warm, 0
    schedule = TuningSchedule(
        total_budget=cfg.tuning_budget if cfg.tuning_budget is not None else cfg.budget,
        fractions=cfg.tuning_fractions,
    )
    result = run_tuning(
        target,
        schedule,
        cfg.sampler,
        rng,
        target_accept=cfg.resolved_target_accept(),
        apply_preconditioning=cfg.apply_preconditioning,
    )
    kernel = dataclasses.replace(
        result.config, sequence_kind=cfg.resolved_sequence_kind()
    )
    return kernel, result.scales, result.state, result.grad_calls


def run_chain(
    kernel: KernelConfig,
    work_target,
    base_target,
    scales: Array,
    warm: ChainState,
    budget: int,
    seed: int,
    grid: list,
    adjusted: bool = True,
) -> ChainRecord:
    """Run one chain for ``budget`` gradient calls, recording the bias curve
    at the shared gradient grid. ``work_target`` is the (possibly
    preconditioned) target the kernel steps on; observables are evaluated on
    positions mapped back through ``scales`` against ``base_target`` truth.
    """
    truth = base_target.ground_truth
    if truth is None:
        raise ConfigurationError(
            f"model {base_target.name!r} has no ground truth to benchmark against"
        )
    rng = np.random.default_rng(seed)
    state = warm.copy()
    state.grad_calls = 0
    state.u = rng.standard_normal(state.u.size)
    state.u /= np.linalg.norm(state.u)
    sched = make_schedule(kernel)
    tracker = MomentTracker(base_target.dim)
    curve = BiasCurve()
    grid_pos = 0
    proposals = accepted = divergences = 0
    while state.grad_calls < budget:
        state, out = kernel_step(state, kernel, work_target, rng, sched, adjusted=adjusted)
        proposals += 1
        accepted += bool(out.accepted)
        divergences += bool(out.divergent)
        tracker.update(base_target.observable(scales * state.x))
        while grid_pos < len(grid) and state.grad_calls >= grid[grid_pos]:
            errors = (tracker.means - truth.moments) ** 2 / truth.variances
            curve.record(grid[grid_pos], errors)
            grid_pos += 1
    return ChainRecord(curve, state.grad_calls, proposals, accepted, divergences)


def run_experiment(cfg: ExperimentConfig, emit: bool = True) -> RunResult:
    """Tune once, run all chains, reduce, and (optionally) write the trace
    CSV, summary CSV, and manifest under the output directory."""
    base_target = make_model(cfg.model, **cfg.model_params)
    kernel, scales, warm, tuning_calls = prepare_kernel(cfg, base_target)
    identity = bool(np.all(scales == 1.0))
    work_target = base_target if identity else precondition(base_target, scales)

    grid = geometric_grid(10, cfg.budget) if cfg.budget > 0 else []
    records = []
    for i in range(cfg.chains):
        records.append(
            run_chain(
                kernel,
                work_target,
                base_target,
                scales,
                warm,
                cfg.budget,
                chain_seed(cfg, i),
                grid,
                adjusted=cfg.adjusted,
            )
        )
    if cfg.budget > 0 and records and records[0].curve.grad_calls:
        crossing = gradients_to_threshold(
            [r.curve for r in records], cfg.threshold, cfg.reduction
        )
    else:
        crossing = None
    out_dir = None
    if emit:
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _emit(cfg, kernel, scales, records, crossing, out_dir)
    return RunResult(cfg, kernel, scales, records, crossing, out_dir, tuning_calls)


def _emit(cfg, kernel, scales, records, crossing, out_dir: Path) -> None:
    label = cfg.run_label()
    rows = []
    for idx, rec in enumerate(records):
        for k in range(len(rec.curve.grad_calls)):
            rows.append(
                [
                    cfg.model,
                    cfg.sampler,
                    idx,
                    rec.curve.grad_calls[k],
                    repr(rec.curve.b2_max[k]),
                    repr(rec.curve.b2_avg[k]),
                    repr(rec.accept_rate),
                    rec.divergences,
                ]
            )
    write_trace_csv(out_dir / f"{label}_trace.csv", rows)
    write_summary_csv(
        out_dir / f"{label}_summary.csv",
        [
            [
                cfg.model,
                cfg.sampler,
                cfg.reduction,
                repr(cfg.threshold),
                cfg.chains,
                -1 if crossing is None else crossing,
            ]
        ],
    )
    manifest = build_manifest(cfg, kernel, scales)
    with open(out_dir / f"{label}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_manifest(cfg: ExperimentConfig, kernel: KernelConfig, scales: Array) -> dict:
    """Resolved config plus tuned hyperparameters and per-chain seeds;
    sufficient to reproduce the run bit-identically on one machine."""
    return {
        "version": __version__,
        "config": cfg.to_dict(),
        "kernel": {
            "step_size": kernel.step_size,
            "traj_length": kernel.traj_length,
            "flavor": kernel.flavor,
            "target_accept": kernel.target_accept,
            "partial_refresh_length": kernel.partial_refresh_length,
            "sequence_kind": kernel.sequence_kind,
        },
        "scales": [float(s) for s in scales],
        "chain_seeds": [chain_seed(cfg, i) for i in range(cfg.chains)],
    }


def grid_search_traj_length(cfg: ExperimentConfig, grid_values, emit: bool = False):
    """For each candidate trajectory length, re-tune the step size at the
    configured acceptance target, run the chains, and report the gradient
    cost to threshold. Rows: (traj_length, step_size, crossing, accept)."""
    if not len(grid_values):
        raise ConfigurationError("trajectory-length grid must be non-empty")
    rows = []
    for length in grid_values:
        base_target = make_model(cfg.model, **cfg.model_params)
        rng = _tuning_rng(cfg)
        counter = CountingTarget(base_target)
        from .adaptation import _dual_average_loop, initial_step_size  # local: shared loop

        x0 = rng.standard_normal(base_target.dim)
        eps0 = initial_step_size(counter, x0, cfg.sampler, rng)
        kernel = KernelConfig(
            step_size=eps0,
            traj_length=float(length),
            flavor=cfg.sampler,
            target_accept=cfg.resolved_target_accept(),
            sequence_kind=cfg.resolved_sequence_kind(),
        )
        state = init_chain_state(counter, x0, rng)
        da_budget = cfg.tuning_budget if cfg.tuning_budget is not None else cfg.budget
        da_budget = max(int(0.1 * da_budget), 1)
        state, kernel, _, stats = _dual_average_loop(
            state, kernel, counter, counter, rng, counter.grad_calls + da_budget, False
        )
        grid = geometric_grid(10, cfg.budget)
        records = [
            run_chain(
                kernel,
                base_target,
                base_target,
                np.ones(base_target.dim),
                state,
                cfg.budget,
                chain_seed(cfg, i),
                grid,
            )
            for i in range(cfg.chains)
        ]
        crossing = gradients_to_threshold(
            [r.curve for r in records], cfg.threshold, cfg.reduction
        )
        accept = float(np.mean([r.accept_rate for r in records]))
        rows.append(
            {
                "traj_length": float(length),
                "step_size": kernel.step_size,
                "gradients_to_threshold": crossing,
                "accept_rate": accept,
            }
        )
    return rows
