"""Linearly constrained quadratic programs and their exact oracles.

The problem is ``min f(x) s.t. Ax = b`` with ``f(x) = 1/2 x^T Q x + q^T x``.
Besides the Lagrangian machinery used by the flow, this module provides the
ground-truth points the diagnostics compare trajectories against: a saddle
point of the Lagrangian, the minimal-norm primal solution and points on the
Tikhonov path ``eps -> x_eps``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

SYMMETRY_RTOL = 1e-12
PSD_EIG_FLOOR = -1e-10
FEASIBILITY_TOL = 1e-8
SADDLE_RTOL = 1e-8
MIN_NORM_EPS = (1e-4, 1e-6, 1e-8)
MIN_NORM_ACCEPT = 1e-7


class ProblemError(ValueError):
    """Raised for malformed problems or problems without a saddle point."""


class Objective(Protocol):
    """Extension hook: anything with a value, a gradient and a Lipschitz constant."""

    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    @property
    def lipschitz(self) -> float: ...


@dataclass(frozen=True)
class QuadraticObjective:
    Q: np.ndarray
    q: np.ndarray
    lipschitz: float = field(init=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        q = np.array(self.q, dtype=float).reshape(-1)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] != q.size:
            raise ProblemError(f"Q must be square n x n with n = len(q); got {Q.shape} and {q.shape}")
        scale = max(1.0, float(np.max(np.abs(Q), initial=0.0)))
        if np.max(np.abs(Q - Q.T), initial=0.0) > SYMMETRY_RTOL * scale:
            raise ProblemError("Q is not symmetric")
        Q = 0.5 * (Q + Q.T)
        eigs = np.linalg.eigvalsh(Q) if Q.size else np.zeros(0)
        if eigs.size and eigs.min() < PSD_EIG_FLOOR * scale:
            raise ProblemError(f"Q is not positive semidefinite (min eigenvalue {eigs.min():.3e})")
        Q.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lipschitz", float(eigs.max()) if eigs.size else 0.0)

    @property
    def n(self) -> int:
        return self.q.size

    def value(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.q @ x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ x + self.q


@dataclass(frozen=True)
class ConstrainedProblem:
    objective: QuadraticObjective
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        n = self.objective.n
        A = np.array(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[1] != n or A.shape[0] != b.size:
            raise ProblemError(f"A must be m x {n} with m = len(b); got {A.shape} and {b.shape}")
        if A.shape[0]:
            x_ls = np.linalg.lstsq(A, b, rcond=None)[0]
            if np.linalg.norm(A @ x_ls - b) > FEASIBILITY_TOL * (1.0 + np.linalg.norm(b)):
                raise ProblemError("infeasible constraints: b is not in the range of A")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.objective.n

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def Q(self) -> np.ndarray:
        return self.objective.Q

    @property
    def q(self) -> np.ndarray:
        return self.objective.q

    @property
    def lipschitz(self) -> float:
        return self.objective.lipschitz

    def f(self, x) -> float:
        return self.objective.value(self._x(x))

    def _x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise ProblemError(f"expected a primal vector of length {self.n}, got {x.size}")
        return x

    def _lam(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float).reshape(-1)
        if lam.size != self.m:
            raise ProblemError(f"expected a dual vector of length {self.m}, got {lam.size}")
        return lam

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "Q": self.Q.reshape(-1).tolist(),
            "q": self.q.tolist(),
            "A": self.A.reshape(-1).tolist(),
            "b": self.b.tolist(),
            "lipschitz": self.lipschitz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstrainedProblem":
        n, m = int(d["n"]), int(d["m"])
        Q = np.asarray(d["Q"], dtype=float).reshape(n, n)
        A = np.asarray(d["A"], dtype=float).reshape(m, n)
        return cls(QuadraticObjective(Q, d["q"]), A, d["b"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ConstrainedProblem":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PrimalDualPoint:
    x: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class SaddleCertificate:
    point: PrimalDualPoint
    stationarity_residual: float
    feasibility_residual: float
    rank_deficient: bool = False

    @property
    def x(self) -> np.ndarray:
        return self.point.x

    @property
    def lam(self) -> np.ndarray:
        return self.point.lam


def grad_f(problem: ConstrainedProblem, x) -> np.ndarray:
    return problem.objective.gradient(problem._x(x))


def lagrangian(problem: ConstrainedProblem, x, lam, rho: float = 0.0) -> float:
    """Augmented Lagrangian ``f(x) + <lam, Ax-b> + rho/2 |Ax-b|^2``; ``rho=0`` is the plain one."""
    if rho < 0:
        raise ProblemError("rho must be nonnegative")
    x, lam = problem._x(x), problem._lam(lam)
    r = problem.A @ x - problem.b
    return problem.objective.value(x) + float(lam @ r) + 0.5 * rho * float(r @ r)


def grad_x_auglag(problem: ConstrainedProblem, x, lam, rho: float = 0.0) -> np.ndarray:
    if rho < 0:
        raise ProblemError("rho must be nonnegative")
    x, lam = problem._x(x), problem._lam(lam)
    A = problem.A
    return problem.objective.gradient(x) + A.T @ lam + rho * (A.T @ (A @ x - problem.b))


def kkt_residuals(problem: ConstrainedProblem, point: PrimalDualPoint) -> tuple[float, float]:
    x, lam = problem._x(point.x), problem._lam(point.lam)
    stat = np.linalg.norm(problem.objective.gradient(x) + problem.A.T @ lam)
    feas = np.linalg.norm(problem.A @ x - problem.b)
    return float(stat), float(feas)


def solve_saddle_point(problem: ConstrainedProblem, rtol: float = SADDLE_RTOL) -> SaddleCertificate:
    """Solve the KKT system ``[[Q, A^T], [A, 0]] (x, lam) = (-q, b)``.

    A least-norm solution is returned when the system is singular (e.g. a
    rank-deficient Q, or redundant rows in A); ``rank_deficient`` is set then.
    """
    n, m = problem.n, problem.m
    K = np.zeros((n + m, n + m))
    K[:n, :n] = problem.Q
    K[:n, n:] = problem.A.T
    K[n:, :n] = problem.A
    rhs = np.concatenate([-problem.q, problem.b])
    sol, _, rank, _ = np.linalg.lstsq(K, rhs, rcond=None)
    point = PrimalDualPoint(sol[:n], sol[n:])
    stat, feas = kkt_residuals(problem, point)
    tol = rtol * (1.0 + np.linalg.norm(problem.q) + np.linalg.norm(problem.b))
    if stat > tol:
        raise ProblemError(
            f"no saddle point: stationarity grad f(x) + A^T lam = 0 cannot be met (residual {stat:.3e})"
        )
    if feas > tol:
        raise ProblemError(f"no saddle point: feasibility Ax = b cannot be met (residual {feas:.3e})")
    return SaddleCertificate(point, stat, feas, rank_deficient=bool(rank < n + m))


def tikhonov_path_point(problem: ConstrainedProblem, rho: float, eps: float, lambda_star) -> np.ndarray:
    """Unique minimizer of ``L_rho(x, lambda_star) + eps/2 |x|^2``."""
    if eps <= 0 or rho <= 0:
        raise ProblemError("tikhonov_path_point needs eps > 0 and rho > 0")
    lam = problem._lam(lambda_star)
    A, b = problem.A, problem.b
    M = problem.Q + rho * (A.T @ A) + eps * np.eye(problem.n)
    r = rho * (A.T @ b) - problem.q - A.T @ lam
    return np.linalg.solve(M, r)


def minimal_norm_solution(
    problem: ConstrainedProblem,
    rho: float = 1.0,
    eps_sequence=MIN_NORM_EPS,
    accept: float = MIN_NORM_ACCEPT,
    saddle: SaddleCertificate | None = None,
) -> np.ndarray:
    """Projection of the origin onto the solution set, as the limit of the Tikhonov path.

    ``x_eps`` is analytic in ``eps`` with a first-order term, so consecutive
    path points are combined by Richardson extrapolation; the limit is
    accepted once two successive extrapolants agree to ``accept``.
    """
    if saddle is None:
        saddle = solve_saddle_point(problem)
    eps = list(eps_sequence)
    path = [tikhonov_path_point(problem, rho, e, saddle.lam) for e in eps]
    extrap = []
    for (e0, x0), (e1, x1) in zip(zip(eps, path), zip(eps[1:], path[1:])):
        extrap.append((e0 * x1 - e1 * x0) / (e0 - e1))
    for a, c in zip(extrap, extrap[1:]):
        if np.linalg.norm(c - a) < accept * (1.0 + np.linalg.norm(c)):
            return c
    if len(extrap) == 1:
        return extrap[0]
    raise ProblemError("Tikhonov path did not settle; refine eps_sequence")


def generate_random_qp(n: int, m: int, seed: int, mode: str = "general") -> ConstrainedProblem:
    """Random QP with ``Q = H^T H + 0.01 I``, Gaussian q and A, uniform b on [0, 1).

    ``mode="orthogonal-square"`` replaces A with the orthogonal QR factor of a
    Gaussian matrix (requires ``n == m``).
    """
    if mode == "general":
        if not (n >= m >= 1):
            raise ProblemError("general mode needs n >= m >= 1")
    elif mode == "orthogonal-square":
        if n != m or n < 1:
            raise ProblemError("orthogonal-square mode needs n == m >= 1")
    else:
        raise ProblemError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((n, n))
    Q = H.T @ H + 0.01 * np.eye(n)
    q = rng.standard_normal(n)
    b = rng.random(m)
    if mode == "general":
        A = rng.standard_normal((m, n))
    else:
        A, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return ConstrainedProblem(QuadraticObjective(Q, q), A, b)


def example2_problem(d: float, e: float, v: float) -> ConstrainedProblem:
    """``min (d x1 + e x2 + v x3)^2  s.t.  d x1 - e x2 + v x3 = 0``."""
    if d == 0 or e == 0 or v == 0:
        raise ProblemError("d, e, v must all be nonzero")
    c = np.array([d, e, v], dtype=float)
    return ConstrainedProblem(
        QuadraticObjective(2.0 * np.outer(c, c), np.zeros(3)),
        np.array([[d, -e, v]], dtype=float),
        np.zeros(1),
    )
