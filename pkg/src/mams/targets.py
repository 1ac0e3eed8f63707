"""Benchmark target densities with analytic or exactly-sampleable ground truth.

Every target exposes the negative log density L(x) (so p(x) = e^{-L(x)}/Z),
its gradient, and per-coordinate ground truth for the benchmark observable.
The default observable is the second moment f_i(x) = x_i^2; heavy-tailed
targets whose second moments diverge track the per-coordinate negative log
density instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray

LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class GroundTruth:
    """Per-coordinate expectations and variances of the tracked observable."""

    moments: Array
    variances: Array
    observable: str = "square"  # "square" or "coord_nlogp"


@dataclass(frozen=True)
class TargetDensity:
    """A differentiable target: dimension, L(x), grad L(x), optional truth.

    ``neg_log_density`` and ``gradient`` must be pure functions; they are
    called concurrently from independent chains. ``exact_sampler(rng, n)``
    returns ``(n, dim)`` iid draws when the target admits one.
    ``observable_fn`` maps a position to the per-coordinate benchmark
    observable; ``None`` means the default x_i^2.
    """

    name: str
    dim: int
    neg_log_density: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    ground_truth: Optional[GroundTruth] = None
    exact_sampler: Optional[Callable[[np.random.Generator, int], Array]] = None
    observable_fn: Optional[Callable[[Array], Array]] = None

    def __post_init__(self):
        if self.dim < 2:
            raise ConfigurationError(
                f"target dimension must be >= 2, got {self.dim}"
            )

    def observable(self, x: Array) -> Array:
        if self.observable_fn is None:
            return x * x
        return self.observable_fn(x)


class CountingTarget:
    """Wraps a target and counts gradient evaluations (the cost proxy)."""

    def __init__(self, target: TargetDensity):
        self._target = target
        self.grad_calls = 0

    @property
    def name(self):
        return self._target.name

    @property
    def dim(self):
        return self._target.dim

    @property
    def ground_truth(self):
        return self._target.ground_truth

    @property
    def exact_sampler(self):
        return self._target.exact_sampler

    def neg_log_density(self, x):
        return self._target.neg_log_density(x)

    def gradient(self, x):
        self.grad_calls += 1
        return self._target.gradient(x)

    def observable(self, x):
        return self._target.observable(x)


def normal_raw_moment(mean: float, var: float, order: int) -> float:
    """E[X^order] for X ~ N(mean, var), by the standard recursion."""
    if order < 0:
        raise ValueError("order must be non-negative")
    m_prev, m = 1.0, mean  # orders 0 and 1
    if order == 0:
        return m_prev
    for k in range(2, order + 1):
        m_prev, m = m, mean * m + (k - 1) * var * m_prev
    return m


def build_gaussian(dim: int, kappa: float, eigen_layout: str = "log_uniform") -> TargetDensity:
    """Diagonal Gaussian with covariance eigenvalues set by the layout.

    ``log_uniform`` spaces the eigenvalues geometrically in [1, kappa],
    ascending along coordinates; ``outlier`` sets the first two eigenvalues
    to kappa and the rest to 1.
    """
    if dim < 2:
        raise ConfigurationError(f"dim must be >= 2, got {dim}")
    if not np.isfinite(kappa) or kappa < 1.0:
        raise ConfigurationError(f"condition number must be >= 1, got {kappa}")
    if eigen_layout == "log_uniform":
        eig = np.geomspace(1.0, kappa, dim)
    elif eigen_layout == "outlier":
        eig = np.ones(dim)
        eig[:2] = kappa
    else:
        raise ConfigurationError(f"unknown eigen_layout {eigen_layout!r}")
    inv_eig = 1.0 / eig
    sd = np.sqrt(eig)

    def nlogp(x):
        return 0.5 * float(np.dot(x * inv_eig, x))

    def grad(x):
        return x * inv_eig

    def sampler(rng, n):
        return rng.standard_normal((n, dim)) * sd

    if kappa == 1.0:
        name = f"standard_gaussian_{dim}d"
    else:
        name = f"{eigen_layout}_gaussian_{dim}d_k{kappa:g}"
    truth = GroundTruth(moments=eig.copy(), variances=2.0 * eig**2)
    return TargetDensity(name, dim, nlogp, grad, truth, sampler)


def build_standard_gaussian(dim: int = 100) -> TargetDensity:
    return build_gaussian(dim, 1.0)


def build_bimodal(dim: int = 50, weight: float = 0.25, mode_shift: float = 4.0,
                  narrow_sd: float = 0.6) -> TargetDensity:
    """Two-component Gaussian mixture (1-weight)*N(0,I) + weight*N(mu, sd^2 I).

    The second mode sits at mu = (mode_shift, 0, ..., 0).
    """
    if not 0.0 < weight < 1.0:
        raise ConfigurationError(f"mixture weight must be in (0,1), got {weight}")
    s2 = narrow_sd**2
    log_w0 = math.log1p(-weight)
    log_w1 = math.log(weight)
    # Normalization offsets of the two components (the shared (2*pi)^{-d/2}
    # cancels in responsibilities but matters for the mixture density itself).
    log_norm1 = -dim * math.log(narrow_sd)

    def _component_logs(x):
        q0 = -0.5 * float(np.dot(x, x))
        dx = x.copy()
        dx[0] -= mode_shift
        q1 = -0.5 * float(np.dot(dx, dx)) / s2 + log_norm1
        return q0, q1, dx

    def nlogp(x):
        q0, q1, _ = _component_logs(x)
        return -float(np.logaddexp(log_w0 + q0, log_w1 + q1))

    def grad(x):
        q0, q1, dx = _component_logs(x)
        a0 = log_w0 + q0
        a1 = log_w1 + q1
        # responsibility of the narrow component
        r1 = 1.0 / (1.0 + math.exp(min(a0 - a1, 700.0)))
        return (1.0 - r1) * x + r1 * dx / s2

    def sampler(rng, n):
        out = rng.standard_normal((n, dim))
        pick = rng.random(n) < weight
        out[pick] *= narrow_sd
        out[pick, 0] += mode_shift
        return out

    mu = np.zeros(dim)
    mu[0] = mode_shift
    m2 = (1 - weight) * 1.0 + weight * (s2 + mu**2)
    m4 = (1 - weight) * 3.0 + weight * np.array(
        [normal_raw_moment(m, s2, 4) for m in mu]
    )
    truth = GroundTruth(moments=m2, variances=m4 - m2**2)
    return TargetDensity(f"bimodal_{dim}d", dim, nlogp, grad, truth, sampler)


def _pair_truth(curvature: float) -> tuple[float, float, float, float]:
    """Observable truth for one (x, y) block: x ~ N(1,1), y|x ~ N(x^2, Q)."""
    m2x = normal_raw_moment(1.0, 1.0, 2)
    m4x = normal_raw_moment(1.0, 1.0, 4)
    m8x = normal_raw_moment(1.0, 1.0, 8)
    ex2, vx2 = m2x, m4x - m2x**2
    ey2 = m4x + curvature
    ey4 = m8x + 6.0 * curvature * m4x + 3.0 * curvature**2
    return ex2, vx2, ey2, ey4 - ey2**2


def build_rosenbrock(pairs: int = 18, curvature: float = 0.1) -> TargetDensity:
    """Independent curved-Gaussian pairs: x ~ N(1,1), y|x ~ N(x^2, Q).

    Coordinates are interleaved as (x_1, y_1, x_2, y_2, ...).
    """
    if pairs < 1:
        raise ConfigurationError("need at least one pair")
    dim = 2 * pairs
    q = curvature

    def nlogp(v):
        x = v[0::2]
        y = v[1::2]
        r = y - x * x
        return 0.5 * float(np.dot(x - 1.0, x - 1.0)) + 0.5 * float(np.dot(r, r)) / q

    def grad(v):
        x = v[0::2]
        y = v[1::2]
        r = y - x * x
        g = np.empty_like(v)
        g[0::2] = (x - 1.0) - 2.0 * x * r / q
        g[1::2] = r / q
        return g

    def sampler(rng, n):
        out = np.empty((n, dim))
        x = 1.0 + rng.standard_normal((n, pairs))
        out[:, 0::2] = x
        out[:, 1::2] = x * x + math.sqrt(q) * rng.standard_normal((n, pairs))
        return out

    ex2, vx2, ey2, vy2 = _pair_truth(q)
    m = np.empty(dim)
    v = np.empty(dim)
    m[0::2], m[1::2] = ex2, ey2
    v[0::2], v[1::2] = vx2, vy2
    truth = GroundTruth(moments=m, variances=v)
    return TargetDensity(f"rosenbrock_{dim}d", dim, nlogp, grad, truth, sampler)


def build_banana() -> TargetDensity:
    """Two-dimensional curved target: a single Rosenbrock-style pair."""
    t = build_rosenbrock(pairs=1)
    return replace(t, name="banana_2d")


def build_cauchy(dim: int = 100) -> TargetDensity:
    """Product of independent standard Cauchy factors.

    Second moments diverge, so the tracked observable is the per-coordinate
    negative log density log(pi) + log(1 + x_i^2).
    """

    def nlogp(x):
        return float(np.sum(np.log1p(x * x))) + dim * LOG_PI

    def grad(x):
        return 2.0 * x / (1.0 + x * x)

    def sampler(rng, n):
        return rng.standard_cauchy((n, dim))

    def observable(x):
        return LOG_PI + np.log1p(x * x)

    # E[log(1+x^2)] = 2 log 2 and Var[log(1+x^2)] = pi^2/3 under standard
    # Cauchy; verified against quadrature in the test suite.
    ent = LOG_PI + 2.0 * math.log(2.0)
    var = math.pi**2 / 3.0
    truth = GroundTruth(
        moments=np.full(dim, ent),
        variances=np.full(dim, var),
        observable="coord_nlogp",
    )
    return TargetDensity(
        f"cauchy_{dim}d", dim, nlogp, grad, truth, sampler, observable_fn=observable
    )


def build_funnel(dim: int = 20, neck_sd: float = 3.0) -> TargetDensity:
    """Hierarchical funnel: z_1 ~ N(0, neck_sd^2) sets the scale e^{z_1/2}
    (a standard deviation) of the remaining coordinates."""
    if dim < 2:
        raise ConfigurationError("funnel needs dim >= 2")
    neck_var = neck_sd**2

    def nlogp(z):
        z1 = z[0]
        rest = z[1:]
        # exp clamp keeps deep-neck evaluations finite; the huge gradients
        # there surface as trajectory divergences, not exceptions.
        w = math.exp(min(-z1, 700.0))
        return float(
            0.5 * z1 * z1 / neck_var
            + 0.5 * (dim - 1) * z1
            + 0.5 * w * np.dot(rest, rest)
        )

    def grad(z):
        z1 = z[0]
        rest = z[1:]
        w = math.exp(min(-z1, 700.0))
        g = np.empty_like(z)
        g[0] = z1 / neck_var + 0.5 * (dim - 1) - 0.5 * w * np.dot(rest, rest)
        g[1:] = w * rest
        return g

    def sampler(rng, n):
        out = np.empty((n, dim))
        z1 = neck_sd * rng.standard_normal(n)
        out[:, 0] = z1
        out[:, 1:] = rng.standard_normal((n, dim - 1)) * np.exp(z1 / 2.0)[:, None]
        return out

    m = np.empty(dim)
    v = np.empty(dim)
    m[0] = neck_var
    v[0] = 2.0 * neck_var**2
    # z_i | z_1 ~ N(0, e^{z_1}); lognormal moments of the mixing variable.
    m[1:] = math.exp(neck_var / 2.0)
    v[1:] = 3.0 * math.exp(2.0 * neck_var) - math.exp(neck_var)
    truth = GroundTruth(moments=m, variances=v)
    return TargetDensity(f"funnel_{dim}d", dim, nlogp, grad, truth, sampler)


def precondition(target: TargetDensity, scales: Array) -> TargetDensity:
    """Reparameterize by x = diag(scales) @ z.

    Sampling the returned target in z and mapping back with ``scales * z``
    is distribution-preserving. Square-observable ground truth transforms
    consistently; other observables lose their per-coordinate truth.
    """
    scales = np.asarray(scales, dtype=float)
    if scales.shape != (target.dim,):
        raise ConfigurationError(
            f"scales must have shape ({target.dim},), got {scales.shape}"
        )
    if not np.all(scales > 0.0) or not np.all(np.isfinite(scales)):
        raise ConfigurationError("scales must be positive and finite")
    base_nlogp = target.neg_log_density
    base_grad = target.gradient

    def nlogp(z):
        return base_nlogp(scales * z)

    def grad(z):
        return scales * base_grad(scales * z)

    truth = target.ground_truth
    if truth is not None and truth.observable == "square":
        truth = GroundTruth(
            moments=truth.moments / scales**2,
            variances=truth.variances / scales**4,
        )
    else:
        truth = None

    sampler = None
    if target.exact_sampler is not None:
        base_sampler = target.exact_sampler

        def sampler(rng, n):
            return base_sampler(rng, n) / scales

    return TargetDensity(
        f"{target.name}|preconditioned",
        target.dim,
        nlogp,
        grad,
        truth,
        sampler,
    )


MODEL_BUILDERS = {
    "standard_gaussian": lambda dim=100, **kw: build_gaussian(dim, 1.0),
    "ill_conditioned_gaussian": lambda dim=100, kappa=100.0, **kw: build_gaussian(
        dim, kappa, kw.get("eigen_layout", "log_uniform")
    ),
    "outlier_gaussian": lambda dim=100, kappa=100.0, **kw: build_gaussian(
        dim, kappa, "outlier"
    ),
    "banana": lambda **kw: build_banana(),
    "bimodal": lambda dim=50, **kw: build_bimodal(dim, **kw),
    "rosenbrock": lambda pairs=18, curvature=0.1, **kw: build_rosenbrock(pairs, curvature),
    "cauchy": lambda dim=100, **kw: build_cauchy(dim),
    "funnel": lambda dim=20, **kw: build_funnel(dim),
}


@dataclass(frozen=True)
class ModelSpec:
    """Registry address of a benchmark model: name plus builder parameters."""

    name: str
    params: dict

    def build(self) -> TargetDensity:
        return make_model(self.name, **self.params)


def _canonical_name(name: str) -> str:
    return name.lower().replace("-", "_").replace(" ", "_")


def make_model(name: str, **params) -> TargetDensity:
    key = _canonical_name(name)
    if key not in MODEL_BUILDERS:
        raise ConfigurationError(
            f"unknown model {name!r}; available: {sorted(MODEL_BUILDERS)}"
        )
    return MODEL_BUILDERS[key](**params)
