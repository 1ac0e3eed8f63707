"""Closed-form position/velocity updates and the leapfrog composition.

Two flavors share the same drift in position. The velocity update differs:
the "micro" flavor moves a unit velocity on the sphere under the projected
gradient and tracks the log-Jacobian of that map as its energy change; the
"hmc" flavor is the usual kick with the quadratic kinetic energy.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np

from .errors import DivergenceError

Array = np.ndarray

MICRO = "micro"
HMC = "hmc"

# Below this gradient norm the sphere update is the identity (avoids 0/0
# when normalizing the gradient direction).
GRAD_NORM_FLOOR = 1e-300

# Energy increments beyond this magnitude mark the trajectory divergent.
ENERGY_DIVERGENCE = 1e10


class PhasePoint(NamedTuple):
    x: Array
    u: Array


class EnergyDelta(NamedTuple):
    delta_v: float
    delta_k: float


class LeapfrogResult(NamedTuple):
    state: PhasePoint
    energy: EnergyDelta
    grad: Array       # gradient at state.x, reusable by the next step
    nlogp: float      # L(state.x), reusable by the next step
    grad_evals: int   # fresh gradient evaluations performed


def position_update(z: PhasePoint, eps: float) -> PhasePoint:
    """Straight-line drift x -> x + eps * u; velocity unchanged."""
    return PhasePoint(z.x + eps * z.u, z.u)


def time_reverse(z: PhasePoint) -> PhasePoint:
    return PhasePoint(z.x, -z.u)


def _log_cosh_plus(rate: float, c: float) -> float:
    """log(cosh(rate) + c*sinh(rate)), stable for large |rate|."""
    a = abs(rate)
    cs = c if rate >= 0 else -c
    # cosh(a) + cs*sinh(a) = e^a * ((1+cs)/2 + (1-cs)/2 * e^{-2a})
    return a + math.log((1.0 + cs) / 2.0 + (1.0 - cs) / 2.0 * math.exp(-2.0 * a))


def velocity_update_micro(z: PhasePoint, grad: Array, eps: float) -> tuple[PhasePoint, float]:
    """Sphere-constrained velocity update under the gradient at fixed x.

    Returns the updated point (with u explicitly renormalized) and the
    kinetic-energy change, which equals the log-Jacobian of the update
    restricted to the sphere.
    """
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient in velocity update")
    d = z.u.size
    gnorm = float(np.linalg.norm(grad))
    if gnorm < GRAD_NORM_FLOOR:
        return z, 0.0
    e = grad / (-gnorm)
    rate = eps * gnorm / (d - 1)
    c = float(np.dot(e, z.u))
    # Work with tanh/sech so that large |rate| cannot overflow.
    em = math.exp(-abs(rate))
    sech = 2.0 * em / (1.0 + em * em)
    th = math.tanh(rate)
    denom = 1.0 + c * th
    u_new = (z.u * sech + (th + c * (1.0 - sech)) * e) / denom
    u_new = u_new / np.linalg.norm(u_new)
    delta_k = (d - 1) * _log_cosh_plus(rate, c)
    return PhasePoint(z.x, u_new), delta_k


def velocity_update_hmc(z: PhasePoint, grad: Array, eps: float) -> tuple[PhasePoint, float]:
    """Plain kick u -> u - eps * grad with quadratic kinetic energy change."""
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient in velocity update")
    u_new = z.u - eps * grad
    delta_k = 0.5 * float(np.dot(u_new, u_new) - np.dot(z.u, z.u))
    return PhasePoint(z.x, u_new), delta_k


_VELOCITY_UPDATES = {MICRO: velocity_update_micro, HMC: velocity_update_hmc}


def micro_divergence(z: PhasePoint, grad: Array) -> float:
    """Phase-space divergence of the sphere velocity drift at (x, u)."""
    gnorm = float(np.linalg.norm(grad))
    if gnorm < GRAD_NORM_FLOOR:
        return 0.0
    e = grad / (-gnorm)
    return -gnorm * float(np.dot(e, z.u))


def _check_energy(value: float, label: str) -> None:
    if not math.isfinite(value) or abs(value) > ENERGY_DIVERGENCE:
        raise DivergenceError(f"{label} diverged: {value!r}")


def leapfrog_step(
    z: PhasePoint,
    eps: float,
    target,
    flavor: str = MICRO,
    grad: Optional[Array] = None,
    nlogp: Optional[float] = None,
) -> LeapfrogResult:
    """One velocity-Verlet step: half kick, drift, half kick.

    ``grad``/``nlogp`` are cached evaluations at z.x; passing them in makes
    adjacent steps cost one fresh gradient each. The returned cache refers
    to the new position.
    """
    kick = _VELOCITY_UPDATES[flavor]
    evals = 0
    try:
        if grad is None:
            grad = target.gradient(z.x)
            evals += 1
        if nlogp is None:
            nlogp = target.neg_log_density(z.x)
        z1, dk1 = kick(z, grad, eps / 2.0)
        z2 = position_update(z1, eps)
        grad_new = target.gradient(z2.x)
        evals += 1
        nlogp_new = target.neg_log_density(z2.x)
        delta_v = nlogp_new - nlogp
        _check_energy(delta_v, "potential change")
        z3, dk2 = kick(z2, grad_new, eps / 2.0)
        delta_k = dk1 + dk2
        _check_energy(delta_k, "kinetic change")
    except DivergenceError as err:
        # Callers marking the trajectory divergent still owe these calls
        # to the gradient account.
        err.grad_evals = evals
        raise
    return LeapfrogResult(z3, EnergyDelta(delta_v, delta_k), grad_new, nlogp_new, evals)
