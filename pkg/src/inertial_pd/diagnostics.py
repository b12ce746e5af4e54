"""Monitored quantities, Lyapunov energies and empirical rate checks along trajectories."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .dynamics import FlowState, effective_schedules
from .problem import ConstrainedProblem, PrimalDualPoint, lagrangian, tikhonov_path_point
from .schedules import ParameterSet

MIN_FIT_SAMPLES = 20
MIN_R2 = 0.9
LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class DiagnosticRecord:
    t: float
    gap: float
    aug_gap: float
    feasibility: float
    obj_residual: float
    grad_residual: float
    kkt_stationarity: float
    speed: float
    energy_E: float
    energy_W: float
    anchor_h: float
    dist_min_norm: float
    x_norm: float


RECORD_FIELDS = tuple(f.name for f in fields(DiagnosticRecord))


@dataclass(frozen=True)
class RateFit:
    window: tuple[float, float]
    slope: float
    intercept: float
    r_squared: float
    n_samples: int
    flagged: bool  # r_squared below MIN_R2: slope is not trustworthy

    def to_dict(self) -> dict:
        return {"window": list(self.window), "slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "n_samples": self.n_samples, "flagged": self.flagged}


def _gaps(problem: ConstrainedProblem, x, saddle: PrimalDualPoint, rho: float):
    """Lagrangian gaps in difference form, free of the cancellation in L(x) - L(x*)."""
    d = x - saddle.x
    Q, A, b = problem.Q, problem.A, problem.b
    grad_star = Q @ saddle.x + problem.q
    r_star = A @ saddle.x - b
    r = A @ x - b
    obj_diff = 0.5 * float(d @ Q @ d) + float(grad_star @ d)
    gap = obj_diff + float(saddle.lam @ (A @ d))
    aug = gap + 0.5 * rho * (float(r @ r) - float(r_star @ r_star))
    return gap, aug, obj_diff, r


def energy_E(problem: ConstrainedProblem, params: ParameterSet, beta, eps,
             state: FlowState, saddle: PrimalDualPoint) -> float:
    t = state.t
    th = params.theta
    _, aug, _, _ = _gaps(problem, state.x, saddle, params.rho)
    dx = state.x - saddle.x
    dl = state.lam - saddle.lam
    px = dx + th * t * state.vx
    pl = dl + th * t * state.vlam
    c = ((params.alpha - 1.0) * th - 1.0) / 2.0
    return (th * th * t * t * beta(t) * (aug + 0.5 * eps(t) * float(state.x @ state.x))
            + 0.5 * float(px @ px) + 0.5 * float(pl @ pl)
            + c * (float(dx @ dx) + float(dl @ dl)))


def energy_W(problem: ConstrainedProblem, params: ParameterSet, beta, eps,
             state: FlowState, saddle: PrimalDualPoint) -> float:
    t = state.t
    _, aug, _, _ = _gaps(problem, state.x, saddle, params.rho)
    kinetic = 0.5 * (float(state.vx @ state.vx) + float(state.vlam @ state.vlam))
    return beta(t) * (aug + 0.5 * eps(t) * float(state.x @ state.x)) + kinetic


def anchor_h(state: FlowState, saddle: PrimalDualPoint) -> float:
    dx = state.x - saddle.x
    dl = state.lam - saddle.lam
    return 0.5 * (float(dx @ dx) + float(dl @ dl))


def record(problem: ConstrainedProblem, params: ParameterSet, beta, eps, state: FlowState,
           saddle: PrimalDualPoint, min_norm_sol) -> DiagnosticRecord:
    x, lam = state.x, state.lam
    gap, aug, obj_diff, r = _gaps(problem, x, saddle, params.rho)
    grad_res = problem.Q @ (x - saddle.x)
    stat = problem.Q @ x + problem.q + problem.A.T @ lam
    speed = np.sqrt(float(state.vx @ state.vx) + float(state.vlam @ state.vlam))
    return DiagnosticRecord(
        t=float(state.t),
        gap=gap,
        aug_gap=aug,
        feasibility=float(np.linalg.norm(r)),
        obj_residual=abs(obj_diff),
        grad_residual=float(np.linalg.norm(grad_res)),
        kkt_stationarity=float(np.linalg.norm(stat)),
        speed=float(speed),
        energy_E=energy_E(problem, params, beta, eps, state, saddle),
        energy_W=energy_W(problem, params, beta, eps, state, saddle),
        anchor_h=anchor_h(state, saddle),
        dist_min_norm=float(np.linalg.norm(x - np.asarray(min_norm_sol))),
        x_norm=float(np.linalg.norm(x)),
    )


def trajectory_records(trajectory, problem, params, beta, eps, variant, saddle,
                       min_norm_sol) -> list[DiagnosticRecord]:
    """Records at the trajectory's sample points, using the variant's effective schedules."""
    beta, eps = effective_schedules(variant, beta, eps)
    return [record(problem, params, beta, eps, s, saddle, min_norm_sol) for s in trajectory.samples()]


def column(records: Sequence[DiagnosticRecord], name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in records], dtype=float)


def write_csv(records: Iterable[DiagnosticRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([format(v, ".17g") for v in astuple(r)])


def read_csv(path) -> list[DiagnosticRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != RECORD_FIELDS:
        raise ValueError(f"unexpected header {rows[0]}")
    return [DiagnosticRecord(*map(float, row)) for row in rows[1:]]


# energy inequality ---------------------------------------------------------

def energy_bound_violation(times, energies, bounds) -> float:
    """Worst excess of the centered difference of E over the derivative bound.

    The centered difference over ``[t_{i-1}, t_{i+1}]`` is the mean of E'
    there, so it is compared with the largest bound on the stencil.
    """
    t = np.asarray(times, dtype=float)
    E = np.asarray(energies, dtype=float)
    B = np.asarray(bounds, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    dE = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    bound = np.maximum(np.maximum(B[2:], B[:-2]), B[1:-1])
    return float(np.max(dE - bound))


def energy_E_bound_check(trajectory, problem, params, beta, eps, variant, saddle) -> float:
    """Worst violation of ``E'(t) <= theta |x*|^2 / 2 * t beta(t) eps(t)`` on the samples."""
    beta, eps = effective_schedules(variant, beta, eps)
    states = trajectory.samples()
    t = np.array([s.t for s in states])
    E = np.array([energy_E(problem, params, beta, eps, s, saddle) for s in states])
    xs2 = float(saddle.x @ saddle.x)
    B = np.array([0.5 * params.theta * xs2 * ti * beta(ti) * eps(ti) for ti in t])
    return energy_bound_violation(t, E, B)


# rates ---------------------------------------------------------------------

def envelope(values) -> np.ndarray:
    """Running maximum from the right: ``env(t_i) = max_{j >= i} v_j``."""
    v = np.asarray(values, dtype=float)
    return np.maximum.accumulate(v[::-1])[::-1]


def fit_rate(times, values, window: tuple[float, float], use_envelope: bool = False) -> RateFit:
    """Least-squares line through ``(ln t, ln value)`` inside ``window``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if use_envelope:
        v = envelope(v)
    lo, hi = window
    if not lo < hi:
        raise ValueError("window must satisfy t_lo < t_hi")
    mask = (t >= lo) & (t <= hi) & np.isfinite(v) & (v >= 0)
    if mask.sum() < MIN_FIT_SAMPLES:
        raise ValueError(f"only {int(mask.sum())} usable samples in window {window}; need {MIN_FIT_SAMPLES}")
    X = np.log(t[mask])
    Y = np.log(np.maximum(v[mask], LOG_FLOOR))
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit((float(lo), float(hi)), float(slope), float(intercept), r2, int(mask.sum()), r2 < MIN_R2)


def running_integral(times, values) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    out = np.zeros_like(v)
    out[1:] = np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))
    return out


def kkt_rate_series(times, stationarity, beta) -> tuple[np.ndarray, np.ndarray]:
    """``(t, sqrt(t) beta(t)^(1/4) |grad f(x) + A^T lam|)``."""
    t = np.asarray(times, dtype=float)
    s = np.asarray(stationarity, dtype=float)
    scale = np.array([np.sqrt(ti) * beta(ti) ** 0.25 for ti in t])
    return t, scale * s


def lemma51_check(problem, eps, state: FlowState, rho: float, lambda_star, min_norm_sol) -> float:
    """Slack of the Tikhonov-path inequality at ``state``: RHS minus LHS, should be >= 0.

    ``(eps/2)(|x - x_eps|^2 + |x_eps|^2 - |xbar|^2) <= L_eps(x) - L_eps(xbar)``
    with ``L_eps(x) = L_rho(x, lambda_star) + eps/2 |x|^2``.
    """
    e = eps(state.t)
    if e <= 0:
        raise ValueError("the check needs eps(t) > 0")
    x = state.x
    xbar = np.asarray(min_norm_sol, dtype=float)
    x_e = tikhonov_path_point(problem, rho, e, lambda_star)

    def L_eps(z):
        return lagrangian(problem, z, lambda_star, rho) + 0.5 * e * float(z @ z)

    lhs = 0.5 * e * (float((x - x_e) @ (x - x_e)) + float(x_e @ x_e) - float(xbar @ xbar))
    return L_eps(x) - L_eps(xbar) - lhs


def velocity_tail_ratio(times, speeds, t_end: float) -> float:
    """``max t*speed over [T/2, T]`` divided by the same over ``[T/4, T/2]``."""
    t = np.asarray(times, dtype=float)
    ts = t * np.asarray(speeds, dtype=float)
    tail = ts[(t >= t_end / 2) & (t <= t_end)]
    prev = ts[(t >= t_end / 4) & (t <= t_end / 2)]
    return float(tail.max() / prev.max())
