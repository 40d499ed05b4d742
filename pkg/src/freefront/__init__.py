"""Reaction-diffusion with resistant free boundaries: stationary and travelling
structures, a front-fixing solver, outcome classification and threshold search."""

from .certificates import Reason, vanishing_certificate
from .classifier import ClassifierConfig, Outcome, compare_runs, detect_outcome, spreading_speed
from .nonlinearity import Nonlinearity, classify_nonlinearity, eval_F, eval_f, lipschitz_bound
from .phase_plane import alpha0, classify_stationary, crossing_B, half_width_ell, profile_V
from .semiwave import solve_cstar
from .solver import InitialData, RunConfig, Trajectory, simulate
from .threshold import ThresholdResult, find_sigma_star

__all__ = [
    "ClassifierConfig",
    "InitialData",
    "Nonlinearity",
    "Outcome",
    "Reason",
    "RunConfig",
    "ThresholdResult",
    "Trajectory",
    "alpha0",
    "classify_nonlinearity",
    "classify_stationary",
    "compare_runs",
    "crossing_B",
    "detect_outcome",
    "eval_F",
    "eval_f",
    "find_sigma_star",
    "half_width_ell",
    "lipschitz_bound",
    "profile_V",
    "simulate",
    "solve_cstar",
    "spreading_speed",
    "vanishing_certificate",
]
