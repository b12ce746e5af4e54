"""Tikhonov-regularized inertial primal-dual flows with time scaling and vanishing damping."""

from .dynamics import FlowState, SystemVariant, pack_state, rhs, unpack_state
from .integrator import IntegrationError, StepperConfig, Trajectory, bs23_step, integrate, integrate_field
from .problem import (ConstrainedProblem, PrimalDualPoint, ProblemError, QuadraticObjective, SaddleCertificate,
                      example2_problem, generate_random_qp, grad_f, grad_x_auglag, kkt_residuals, lagrangian,
                      minimal_norm_solution, solve_saddle_point, tikhonov_path_point)
from .schedules import (CallableSchedule, ParameterSet, PowerSchedule, RegimeReport, check_assumption1,
                        check_assumption2, check_scaling, classify_regime, eval_schedule)

__all__ = [
    "CallableSchedule", "ConstrainedProblem", "FlowState", "IntegrationError", "ParameterSet",
    "PowerSchedule", "PrimalDualPoint", "ProblemError", "QuadraticObjective", "RegimeReport",
    "SaddleCertificate", "StepperConfig", "SystemVariant", "Trajectory", "bs23_step",
    "check_assumption1", "check_assumption2", "check_scaling", "classify_regime", "eval_schedule",
    "example2_problem", "generate_random_qp", "grad_f", "grad_x_auglag", "integrate", "integrate_field",
    "kkt_residuals", "lagrangian", "minimal_norm_solution", "pack_state", "rhs", "solve_saddle_point",
    "tikhonov_path_point", "unpack_state",
]
