"""Adaptive Bogacki-Shampine 3(2) integration with grid-forced sampling.

Two drivers share one stepping rule:

* :func:`integrate_field` runs any flat vector field ``f(t, y)`` in Python
  and can keep every accepted step as an interpolation node.
* :func:`integrate` runs the primal-dual flow. With power-law schedules it
  dispatches to a compiled kernel (``_kernel``); the trajectory then keeps
  the sample-grid points only, which is what long horizons can afford.

Step control: ``h <- h * clip(safety * err**(-1/3), 1/5, 5)``, capped at
``h_max``, with ``err`` the RMS of ``e_i / (atol + rtol |y_i|)``. State
updates use compensated summation; runs of 10^7 steps otherwise drift by
accumulated round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .dynamics import FlowState, SystemVariant, effective_schedules, make_field, pack_state, unpack_state
from .schedules import PowerSchedule

# Bogacki-Shampine tableau
_C2, _C3 = 0.5, 0.75
_B1, _B2, _B3 = 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0
# third-order minus embedded second-order weights
_E1, _E2, _E3, _E4 = -5.0 / 72.0, 1.0 / 12.0, 1.0 / 9.0, -1.0 / 8.0

STEP_FLOOR = 1e-12  # relative to t

OK, MAX_STEPS, NONFINITE, UNDERFLOW = 0, 1, 2, 3


class IntegrationError(RuntimeError):
    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last finite state at t={last_time:.17g})")
        self.last_time = last_time


@dataclass(frozen=True)
class StepperConfig:
    rtol: float = 1e-6
    atol: float = 1e-9
    h_init: float = 1e-3
    h_max: float = 1.0
    safety: float = 0.9
    max_steps: int = 10**7

    def __post_init__(self):
        for name in ("rtol", "atol", "h_init", "h_max", "safety", "max_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"StepperConfig.{name} must be positive")
        if self.rtol < 1e-14:
            raise ValueError("rtol below 1e-14 is not meaningful in double precision")


class BS23Step(NamedTuple):
    y: np.ndarray  # third-order solution
    err: np.ndarray  # third-order minus second-order solution
    f_end: np.ndarray  # field at (t + h, y), reused as the next first stage
    increment: np.ndarray  # y - y_in before compensation


def bs23_step(field: Callable, y: np.ndarray, t: float, h: float,
              f0: np.ndarray | None = None, comp: np.ndarray | None = None) -> BS23Step:
    if h <= 0:
        raise ValueError("step size must be positive")
    k1 = field(t, y) if f0 is None else f0
    k2 = field(t + _C2 * h, y + _C2 * h * k1)
    k3 = field(t + _C3 * h, y + _C3 * h * k2)
    inc = h * (_B1 * k1 + _B2 * k2 + _B3 * k3)
    if comp is not None:
        inc = inc - comp
    y_new = y + inc
    k4 = field(t + h, y_new)
    err = h * (_E1 * k1 + _E2 * k2 + _E3 * k3 + _E4 * k4)
    if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(k4))):
        raise IntegrationError("non-finite field evaluation", t)
    return BS23Step(y_new, err, k4, inc)


def error_norm(err: np.ndarray, y: np.ndarray, rtol: float, atol: float) -> float:
    return float(np.sqrt(np.mean((err / (atol + rtol * np.abs(y))) ** 2)))


class Trajectory:
    """Time-ordered nodes ``(t_k, y_k, f(t_k, y_k))`` with cubic Hermite interpolation."""

    def __init__(self, times, states, derivs, dims, sample_index, stats=None):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.derivs = np.asarray(derivs, dtype=float)
        self.dims = tuple(dims)
        self.sample_index = np.asarray(sample_index, dtype=int)
        self.stats = dict(stats or {})
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.size

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def sample_times(self) -> np.ndarray:
        return self.times[self.sample_index]

    def node(self, k: int) -> FlowState:
        return unpack_state(self.states[k], self.dims, float(self.times[k]))

    def samples(self) -> list[FlowState]:
        return [self.node(k) for k in self.sample_index]

    def interpolate(self, t: float) -> np.ndarray:
        ts = self.times
        if not (ts[0] <= t <= ts[-1]):
            raise ValueError(f"t={t} outside [{ts[0]}, {ts[-1]}]")
        k = int(np.searchsorted(ts, t, side="right")) - 1
        if k >= ts.size - 1:
            return self.states[-1].copy()
        if t == ts[k]:
            return self.states[k].copy()
        h = ts[k + 1] - ts[k]
        s = (t - ts[k]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return (h00 * self.states[k] + h10 * h * self.derivs[k]
                + h01 * self.states[k + 1] + h11 * h * self.derivs[k + 1])

    def at(self, t: float) -> FlowState:
        return unpack_state(self.interpolate(t), self.dims, float(t))


def _prepare_grid(t0: float, t_end: float, sample_grid) -> np.ndarray:
    if not t_end > t0:
        raise ValueError(f"need t_end > t0, got t0={t0}, t_end={t_end}")
    if sample_grid is None:
        return np.array([t_end])
    grid = np.asarray(sample_grid, dtype=float).reshape(-1)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("sample grid must be strictly increasing")
    if grid[0] < t0 or grid[-1] > t_end:
        raise ValueError("sample grid must lie within [t0, t_end]")
    grid = grid[grid > t0]
    if grid.size == 0 or grid[-1] < t_end:
        grid = np.append(grid, t_end)
    return grid


def integrate_field(field: Callable, t0: float, y0, t_end: float,
                    config: StepperConfig = StepperConfig(), sample_grid=None,
                    dims: tuple[int, int] | None = None, dense: bool = True,
                    include_t0_sample: bool = True) -> Trajectory:
    """Integrate ``y' = field(t, y)`` on ``[t0, t_end]``.

    Every point of ``sample_grid`` becomes a step endpoint. With ``dense`` all
    accepted steps are stored as interpolation nodes, otherwise only the grid.
    """
    y = np.array(y0, dtype=float)
    if dims is None:
        dims = (y.size, 0)
    grid = _prepare_grid(t0, t_end, sample_grid)
    t = float(t0)
    f0 = field(t, y)
    comp = np.zeros_like(y)
    h = min(config.h_init, config.h_max)
    times, states, derivs, samples = [t], [y.copy()], [f0.copy()], []
    if include_t0_sample:
        samples.append(0)
    attempts = accepted = 0
    for target in grid:
        while t < target:
            if attempts >= config.max_steps:
                raise IntegrationError(f"max_steps={config.max_steps} exceeded", t)
            if h < STEP_FLOOR * t:
                raise IntegrationError(f"step size {h:.3e} below floor", t)
            clipped = t + h >= target
            hs = target - t if clipped else h
            attempts += 1
            step = bs23_step(field, y, t, hs, f0, comp)
            err = error_norm(step.err, y, config.rtol, config.atol)
            if not np.isfinite(err):
                raise IntegrationError("non-finite error estimate", t)
            fac = min(5.0, max(0.2, config.safety * (1.0 / max(err, 1e-16)) ** (1.0 / 3.0)))
            if err <= 1.0:
                comp = (step.y - y) - step.increment
                y, f0 = step.y, step.f_end
                t = float(target) if clipped else t + hs
                accepted += 1
                h = h * min(1.0, fac) if clipped else hs * fac
                if dense and t < target:
                    times.append(t)
                    states.append(y.copy())
                    derivs.append(f0.copy())
            else:
                h = hs * fac
            h = min(h, config.h_max)
        times.append(t)
        states.append(y.copy())
        derivs.append(f0.copy())
        samples.append(len(times) - 1)
    stats = {"accepted": accepted, "rejected": attempts - accepted, "backend": "python"}
    return Trajectory(times, states, derivs, dims, samples, stats)


def _initial_vector(problem, initial: FlowState) -> np.ndarray:
    if initial.dims != (problem.n, problem.m):
        raise ValueError(f"initial state dims {initial.dims} do not match problem ({problem.n}, {problem.m})")
    return pack_state(initial)


def integrate(problem, params, beta, eps, variant, initial: FlowState, t_end: float,
              config: StepperConfig = StepperConfig(), sample_grid=None,
              backend: str = "auto", dense: bool = False) -> Trajectory:
    """Integrate the primal-dual flow from ``initial`` (at ``initial.t``) to ``t_end``.

    ``backend`` is ``"compiled"``, ``"python"`` or ``"auto"`` (compiled when
    both schedules are power laws and ``dense`` is off).
    """
    variant = SystemVariant.parse(variant)
    y0 = _initial_vector(problem, initial)
    t0 = float(initial.t)
    if t0 < params.t0:
        raise ValueError(f"initial time {t0} precedes t0={params.t0}")
    dims = (problem.n, problem.m)
    b_eff, e_eff = effective_schedules(variant, beta, eps)
    powers = isinstance(b_eff, PowerSchedule) and isinstance(e_eff, PowerSchedule)
    if backend == "auto":
        backend = "compiled" if powers and not dense else "python"
    if backend == "python":
        field = make_field(problem, params, beta, eps, variant)
        return integrate_field(field, t0, y0, t_end, config, sample_grid, dims=dims, dense=dense)
    if backend != "compiled":
        raise ValueError(f"unknown backend {backend!r}")
    if not powers:
        raise ValueError("the compiled backend needs power-law schedules")
    from . import _kernel

    grid = _prepare_grid(t0, t_end, sample_grid)
    return _kernel.integrate_compiled(problem, params, b_eff, e_eff, y0, t0, grid, config, dims)
