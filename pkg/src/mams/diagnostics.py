"""Error and efficiency measurement: normalized moment error, integrated
autocorrelation time, and gradients-to-threshold readouts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateSeriesError

Array = np.ndarray

TAU_FLOOR = 1e-6


def b_squared(est: float, truth: float, var_truth: float) -> float:
    """Squared expectation error normalized by the observable's variance.

    A value of 0.01 is the accuracy of roughly 100 effective samples.
    """
    if not var_truth > 0.0:
        raise ValueError(f"var_truth must be positive, got {var_truth}")
    return (est - truth) ** 2 / var_truth


def autocorrelations(series: Array) -> Array:
    """Empirical autocorrelation function, lags 0..n-1, FFT-based."""
    x = np.asarray(series, dtype=float)
    n = x.size
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] <= 0.0:
        raise DegenerateSeriesError("series has no variance")
    return acov / acov[0]


def tau_int(series: Array) -> float:
    """Integrated autocorrelation time 1 + 2*sum(rho_t), with the sum
    truncated at the first non-positive Geyer pair; floored at 1e-6."""
    x = np.asarray(series, dtype=float)
    if x.size < 100:
        raise ValueError(f"need at least 100 points, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    rho = autocorrelations(x)
    n_pairs = rho.size // 2
    total = 0.0
    for m in range(n_pairs):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        total += pair
    return max(2.0 * total - 1.0, TAU_FLOOR)


def harmonic_mean_tau(taus: Sequence[float]) -> float:
    t = np.asarray(list(taus), dtype=float)
    if t.size == 0:
        raise ValueError("need at least one autocorrelation time")
    if not np.all(t > 0.0):
        raise ValueError("autocorrelation times must be positive")
    return t.size / float(np.sum(1.0 / t))


class MomentTracker:
    """Running per-coordinate mean of an observable along one chain."""

    def __init__(self, dim: int):
        self.means = np.zeros(dim)
        self.count = 0

    def update(self, values: Array) -> None:
        self.count += 1
        self.means += (values - self.means) / self.count


@dataclass
class BiasCurve:
    """Normalized moment error recorded against cumulative gradient calls."""

    grad_calls: list = field(default_factory=list)
    b2_max: list = field(default_factory=list)
    b2_avg: list = field(default_factory=list)

    def record(self, grads: int, errors: Array) -> None:
        if self.grad_calls and grads <= self.grad_calls[-1]:
            raise ValueError("gradient counts must be strictly increasing")
        self.grad_calls.append(int(grads))
        self.b2_max.append(float(np.max(errors)))
        self.b2_avg.append(float(np.mean(errors)))

    def values(self, reduction: str) -> list:
        if reduction == "max":
            return self.b2_max
        if reduction == "avg":
            return self.b2_avg
        raise ValueError(f"unknown reduction {reduction!r}")


def geometric_grid(start: int, stop: int, ratio: float = 1.05) -> list[int]:
    """Strictly increasing integer grid growing by the given ratio."""
    grid = []
    g = float(max(1, start))
    prev = 0
    while g <= stop:
        v = int(math.ceil(g))
        if v > prev:
            grid.append(v)
            prev = v
        g *= ratio
    if not grid or grid[-1] < stop:
        grid.append(int(stop))
    return grid


def gradients_to_threshold(
    curves: Sequence[BiasCurve], threshold: float, reduction: str = "max"
) -> Optional[int]:
    """First gradient count at which the across-chain median error drops
    below the threshold and stays below for the rest of the recorded grid.

    Returns None when the median never settles below the threshold.
    """
    if not curves:
        raise ValueError("need at least one chain curve")
    grid = curves[0].grad_calls
    for c in curves[1:]:
        if c.grad_calls != grid:
            raise ValueError("chain curves are recorded on misaligned grids")
    if not grid:
        return None
    values = np.array([c.values(reduction) for c in curves])
    med = np.median(values, axis=0)
    below = med < threshold
    # last index where the median is at or above threshold
    above_idx = np.nonzero(~below)[0]
    first = 0 if above_idx.size == 0 else above_idx[-1] + 1
    if first >= len(grid):
        return None
    return int(grid[first])


TRACE_COLUMNS = [
    "model",
    "sampler",
    "chain",
    "gradient_calls",
    "b2_max",
    "b2_avg",
    "accept_rate",
    "divergences",
]

SUMMARY_COLUMNS = [
    "model",
    "sampler",
    "reduction",
    "threshold",
    "chains",
    "gradients_to_threshold",
]


def write_trace_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        w.writerows(rows)


def write_summary_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
