"""Vector field of the inertial primal-dual flow, reduced to first order.

The second-order system in ``(x, lam)`` becomes a first-order system on the
phase space ``[x | lam | vx | vlam]`` of length ``2(n + m)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .problem import ConstrainedProblem
from .schedules import ParameterSet, PowerSchedule


class SystemVariant(str, enum.Enum):
    TIKHONOV_SCALED = "TikhonovScaled"
    HN_AVD = "HN_AVD"  # no Tikhonov term
    Z_AVD = "Z_AVD"  # no Tikhonov term, no time scaling

    @classmethod
    def parse(cls, s) -> "SystemVariant":
        if isinstance(s, cls):
            return s
        key = str(s).replace("-", "_").lower()
        for v in cls:
            if v.value.lower() == key or v.name.lower() == key:
                return v
        if key in ("z2", "tikhonov"):
            return cls.TIKHONOV_SCALED
        raise ValueError(f"unknown system variant {s!r}")


@dataclass(frozen=True)
class FlowState:
    t: float
    x: np.ndarray
    lam: np.ndarray
    vx: np.ndarray
    vlam: np.ndarray

    @property
    def dims(self) -> tuple[int, int]:
        return self.x.size, self.lam.size


def effective_schedules(variant: SystemVariant, beta, eps):
    """Schedules actually driving ``variant`` (eps dropped, or eps and beta dropped)."""
    variant = SystemVariant.parse(variant)
    if variant is SystemVariant.TIKHONOV_SCALED:
        return beta, eps
    if variant is SystemVariant.HN_AVD:
        return beta, PowerSchedule(0.0, 0.0)
    return PowerSchedule(1.0, 0.0), PowerSchedule(0.0, 0.0)


def pack_state(state: FlowState) -> np.ndarray:
    return np.concatenate([state.x, state.lam, state.vx, state.vlam]).astype(float)


def unpack_state(flat, dims: tuple[int, int], t: float = 0.0) -> FlowState:
    n, m = dims
    flat = np.asarray(flat, dtype=float)
    if flat.ndim != 1 or flat.size != 2 * (n + m):
        raise ValueError(f"state vector must have length {2 * (n + m)}, got {flat.shape}")
    return FlowState(t, flat[:n].copy(), flat[n:n + m].copy(),
                     flat[n + m:2 * n + m].copy(), flat[2 * n + m:].copy())


def _accelerations(problem, params, beta_t, eps_t, t, x, lam, vx, vlam):
    A, b = problem.A, problem.b
    damp = params.alpha / t
    tt = params.theta * t
    force = (problem.objective.gradient(x) + A.T @ (lam + tt * vlam)
             + params.rho * (A.T @ (A @ x - b)) + eps_t * x)
    ax = -damp * vx - beta_t * force
    alam = -damp * vlam + beta_t * (A @ (x + tt * vx) - b)
    return ax, alam


def rhs(problem: ConstrainedProblem, params: ParameterSet, beta, eps,
        variant: SystemVariant, state: FlowState):
    """Phase-space velocity ``(vx, vlam, ax, alam)`` at ``state``."""
    t = state.t
    if t <= 0:
        raise ValueError(f"the flow is defined for t > 0, got t={t}")
    beta, eps = effective_schedules(variant, beta, eps)
    ax, alam = _accelerations(problem, params, beta(t), eps(t), t,
                              state.x, state.lam, state.vx, state.vlam)
    return state.vx.copy(), state.vlam.copy(), ax, alam


def make_field(problem: ConstrainedProblem, params: ParameterSet, beta, eps, variant):
    """Flat vector field ``f(t, y)`` for the generic integrator."""
    beta, eps = effective_schedules(variant, beta, eps)
    n, m = problem.n, problem.m

    def field(t, y):
        x, lam = y[:n], y[n:n + m]
        vx, vlam = y[n + m:2 * n + m], y[2 * n + m:]
        ax, alam = _accelerations(problem, params, beta(t), eps(t), t, x, lam, vx, vlam)
        return np.concatenate([vx, vlam, ax, alam])

    return field
