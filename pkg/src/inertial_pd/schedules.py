"""Damping, scaling and regularization parameters of the flow.

Time scaling ``beta(t)`` and Tikhonov weight ``eps(t)`` are power laws
``c * t**p``; ``eps`` uses a negative exponent (``eps = c / t**r1``) and
``beta`` a nonnegative one (``beta = t**r2``). With power laws every
condition the convergence theory asks for reduces to arithmetic on the
exponents, which is what :func:`classify_regime` does.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

FAST = "Fast"
SLOW = "Slow"
UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class ParameterSet:
    alpha: float
    theta: float
    rho: float
    t0: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.theta <= 0 or self.rho < 0 or self.t0 <= 0:
            raise ValueError(f"invalid parameters {self}: need alpha, theta, t0 > 0 and rho >= 0")


@dataclass(frozen=True)
class PowerSchedule:
    """``value(t) = coefficient * t**exponent``."""

    coefficient: float
    exponent: float = 0.0

    def __call__(self, t: float) -> float:
        return self.coefficient * t**self.exponent

    def derivative(self, t: float) -> float:
        if self.exponent == 0.0:
            return 0.0
        return self.coefficient * self.exponent * t ** (self.exponent - 1.0)

    @property
    def is_zero(self) -> bool:
        return self.coefficient == 0.0

    @classmethod
    def decaying(cls, coefficient: float, rate: float) -> "PowerSchedule":
        """``coefficient / t**rate``."""
        return cls(coefficient, -rate)

    def to_dict(self) -> dict:
        return {"coeff": self.coefficient, "exponent": self.exponent}

    @classmethod
    def from_dict(cls, d: dict) -> "PowerSchedule":
        return cls(float(d["coeff"]), float(d.get("exponent", 0.0)))


@dataclass(frozen=True)
class CallableSchedule:
    """General schedule given by value and derivative callables.

    Accepted by the dynamics and diagnostics, but the regime analysis only
    understands power laws and reports such schedules as unclassified.
    """

    value: Callable[[float], float]
    deriv: Callable[[float], float]

    def __call__(self, t: float) -> float:
        return float(self.value(t))

    def derivative(self, t: float) -> float:
        return float(self.deriv(t))


@dataclass(frozen=True)
class RegimeReport:
    assumption1: bool
    assumption2: bool
    scaling_condition: bool
    strict_scaling: bool
    integrable_over_t: bool
    fast_integrable: bool
    slow_divergent: bool
    label: str
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def eval_schedule(s, t: float) -> tuple[float, float]:
    if t <= 0:
        raise ValueError(f"schedules are defined for t > 0, got t={t}")
    return s(t), s.derivative(t)


def _is_power(s) -> bool:
    return isinstance(s, PowerSchedule)


def _eps_ok(eps) -> bool:
    # nonnegative, nonincreasing, vanishing at infinity
    if eps.is_zero:
        return True
    return eps.coefficient > 0 and eps.exponent < 0


def check_assumption1(params: ParameterSet, beta: PowerSchedule, eps: PowerSchedule) -> bool:
    a, th = params.alpha, params.theta
    if not (a > 1 and th >= 1.0 / (a - 1.0) and params.rho >= 0):
        return False
    return beta.coefficient > 0 and _eps_ok(eps)


def check_assumption2(params: ParameterSet, beta: PowerSchedule, eps: PowerSchedule) -> bool:
    a, th = params.alpha, params.theta
    if not (a > 3 and 1.0 / (a - 1.0) < th < 0.5 and params.rho > 0):
        return False
    return beta.coefficient > 0 and beta.exponent >= 0 and _eps_ok(eps)


def scaling_bound(theta: float) -> float:
    """Upper bound ``(1 - 2 theta) / theta`` on ``t beta'(t) / beta(t)``."""
    return (1.0 - 2.0 * theta) / theta


def check_scaling(params: ParameterSet, beta: PowerSchedule, strict: bool = False) -> bool:
    # for a power law t*beta'/beta is the exponent itself
    bound = scaling_bound(params.theta)
    return beta.exponent < bound if strict else beta.exponent <= bound


def classify_regime(params: ParameterSet, beta, eps) -> RegimeReport:
    if not (_is_power(beta) and _is_power(eps)):
        return RegimeReport(False, False, False, False, False, False, False, UNCLASSIFIED,
                            ("non-power schedule: regime left to numerical evidence",))
    a1 = check_assumption1(params, beta, eps)
    a2 = check_assumption2(params, beta, eps)
    sc = check_scaling(params, beta)
    ssc = check_scaling(params, beta, strict=True)
    notes = []
    if eps.is_zero:
        # beta*eps == 0: every integrability condition holds trivially
        integrable_t = fast = True
        slow = False
    else:
        gap = -eps.exponent - beta.exponent  # r1 - r2, with beta*eps = c t^(r2 - r1)
        integrable_t = gap > 0
        fast = gap > 2
        slow = gap < 2
        if np.isclose(gap, 2.0, rtol=0, atol=1e-12):
            notes.append("r1 - r2 = 2: logarithmically corrected rates apply, no regime claimed")
    if fast and sc:
        label = FAST
    elif slow and integrable_t and sc:
        label = SLOW
    else:
        label = UNCLASSIFIED
    if not a1:
        notes.append("base conditions fail: need alpha > 1, theta >= 1/(alpha - 1), beta > 0, eps nonincreasing to 0")
    return RegimeReport(a1, a2, sc, ssc, integrable_t, fast, slow, label, tuple(notes))
