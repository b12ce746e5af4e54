"""Compiled stepping loop for the primal-dual flow with power-law schedules.

Same tableau, error norm, step control and compensated update as
``integrator.integrate_field``. The field folds ``Q + rho A^T A`` and
``q - rho A^T b`` into precomputed arrays, so results agree with the Python
path to integration tolerance, not bitwise.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .integrator import MAX_STEPS, NONFINITE, OK, STEP_FLOOR, UNDERFLOW, IntegrationError, Trajectory

# reassociation lets the dot products vectorize; NaN/Inf semantics must stay intact
_FAST = {"reassoc", "contract", "arcp"}


@njit(cache=True, fastmath=_FAST, nogil=True)
def _field(t, y, out, w, z, QA, A, AT, c0, b, alpha, theta, bc, be, ec, ee):
    n = QA.shape[0]
    m = A.shape[0]
    beta = bc * t**be
    eps = ec * t**ee
    damp = alpha / t
    tt = theta * t
    for i in range(n + m):
        out[i] = y[n + m + i]
    for j in range(m):
        w[j] = y[n + j] + tt * y[2 * n + m + j]
    for j in range(n):
        z[j] = y[j] + tt * y[n + m + j]
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += QA[i, j] * y[j]
        s2 = 0.0
        for j in range(m):
            s2 += AT[i, j] * w[j]
        out[n + m + i] = -damp * y[n + m + i] - beta * (s + s2 + c0[i] + eps * y[i])
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += A[i, j] * z[j]
        out[2 * n + m + i] = -damp * y[2 * n + m + i] + beta * (s - b[i])


@njit(cache=True, nogil=True)
def _segment(y, f0, comp, t, target, h, attempts, QA, A, AT, c0, b, alpha, theta,
             bc, be, ec, ee, rtol, atol, safety, h_max, max_steps):
    """Advance ``y`` in place from ``t`` to exactly ``target``.

    Returns ``(t, h, attempts, accepted, status)``.
    """
    N = y.size
    n = QA.shape[0]
    m = A.shape[0]
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    tmp = np.empty(N)
    yn = np.empty(N)
    inc = np.empty(N)
    w = np.empty(m)
    z = np.empty(n)
    accepted = 0
    while t < target:
        if attempts >= max_steps:
            return t, h, attempts, accepted, MAX_STEPS
        if h < STEP_FLOOR * t:
            return t, h, attempts, accepted, UNDERFLOW
        clipped = t + h >= target
        hs = target - t if clipped else h
        attempts += 1
        for i in range(N):
            tmp[i] = y[i] + 0.5 * hs * f0[i]
        _field(t + 0.5 * hs, tmp, k2, w, z, QA, A, AT, c0, b, alpha, theta, bc, be, ec, ee)
        for i in range(N):
            tmp[i] = y[i] + 0.75 * hs * k2[i]
        _field(t + 0.75 * hs, tmp, k3, w, z, QA, A, AT, c0, b, alpha, theta, bc, be, ec, ee)
        for i in range(N):
            inc[i] = hs * (2.0 / 9.0 * f0[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]) - comp[i]
            yn[i] = y[i] + inc[i]
        _field(t + hs, yn, k4, w, z, QA, A, AT, c0, b, alpha, theta, bc, be, ec, ee)
        acc = 0.0
        for i in range(N):
            e = hs * (-5.0 / 72.0 * f0[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 1.0 / 8.0 * k4[i])
            r = e / (atol + rtol * abs(y[i]))
            acc += r * r
        err = np.sqrt(acc / N)
        if not np.isfinite(err):
            return t, h, attempts, accepted, NONFINITE
        fac = safety * (1.0 / max(err, 1e-16)) ** (1.0 / 3.0)
        fac = min(5.0, max(0.2, fac))
        if err <= 1.0:
            for i in range(N):
                comp[i] = (yn[i] - y[i]) - inc[i]
                y[i] = yn[i]
                f0[i] = k4[i]
            t = target if clipped else t + hs
            accepted += 1
            h = h * min(1.0, fac) if clipped else hs * fac
        else:
            h = hs * fac
        h = min(h, h_max)
    return t, h, attempts, accepted, OK


def integrate_compiled(problem, params, beta, eps, y0, t0, grid, config, dims) -> Trajectory:
    A = np.ascontiguousarray(problem.A, dtype=float)
    AT = np.ascontiguousarray(A.T)
    QA = np.ascontiguousarray(problem.Q + params.rho * (A.T @ A))
    c0 = np.ascontiguousarray(problem.q - params.rho * (A.T @ problem.b))
    b = np.ascontiguousarray(problem.b, dtype=float)
    coeffs = (float(params.alpha), float(params.theta), float(beta.coefficient), float(beta.exponent),
              float(eps.coefficient), float(eps.exponent))
    w, z = np.empty(problem.m), np.empty(problem.n)

    y = np.array(y0, dtype=float)
    f0 = np.empty_like(y)
    _field(float(t0), y, f0, w, z, QA, A, AT, c0, b, *coeffs)
    comp = np.zeros_like(y)
    times, states, derivs = [float(t0)], [y.copy()], [f0.copy()]
    t, h = float(t0), min(config.h_init, config.h_max)
    attempts = accepted = 0
    for target in grid:
        t, h, attempts, acc, status = _segment(
            y, f0, comp, t, float(target), h, attempts, QA, A, AT, c0, b, *coeffs,
            config.rtol, config.atol, config.safety, config.h_max, config.max_steps)
        accepted += acc
        if status == MAX_STEPS:
            raise IntegrationError(f"max_steps={config.max_steps} exceeded", t)
        if status == UNDERFLOW:
            raise IntegrationError(f"step size {h:.3e} below floor", t)
        if status == NONFINITE:
            raise IntegrationError("non-finite state", t)
        times.append(t)
        states.append(y.copy())
        derivs.append(f0.copy())
    stats = {"accepted": accepted, "rejected": attempts - accepted, "backend": "compiled"}
    return Trajectory(times, states, derivs, dims, np.arange(len(times)), stats)
