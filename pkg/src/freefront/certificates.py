"""Sufficient conditions that guarantee vanishing without running the solver.

Every check is one-sided: a returned ``Reason`` means vanishing is certain,
``None`` means nothing could be concluded.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .nonlinearity import Nonlinearity, classify_nonlinearity, lipschitz_bound
from .phase_plane import (
    _equal_alpha,
    classify_stationary,
    critical_resistance,
    crossing_B,
    plateau_profile,
    profile_V,
)
from .solver import InitialData, ValidatedInitial, validate_initial

ALPHA_ABOVE_CRITICAL = "alpha_above_critical"
CRITICAL_UNATTAINED = "critical_unattained"
BELOW_PLATEAU = "below_plateau"
BELOW_STATIONARY = "below_stationary"
BELOW_THETA = "below_theta"
SMALL_MASS = "small_mass"

ORDER_TOL = 1e-12
PLATEAU_SHIFTS = np.linspace(0.0, 40.0, 81)


@dataclass(frozen=True)
class Reason:
    name: str
    margin: float
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def growth_constant(nl: Nonlinearity) -> float:
    """K with f(u) <= K u on [0, 1], taken as max(f'(0)^+, max |f'| on [0, 1])."""
    return max(max(float(nl.df(0.0)), 0.0), lipschitz_bound(nl, min(1.0, nl.domain_cap)))


def _plateau_check(u0: np.ndarray, x: np.ndarray, h0: float, nl: Nonlinearity, alpha: float) -> Reason | None:
    shifts = h0 + PLATEAU_SHIFTS
    V = plateau_profile(nl, alpha, float(shifts[-1] + h0))
    best = -math.inf
    for b in shifts:
        margin = float(np.min(V(x + b) - u0))
        best = max(best, margin)
        if margin >= -ORDER_TOL:
            return Reason(BELOW_PLATEAU, margin, f"u0 <= plateau profile shifted by b={b:.6g}")
    return None


def _stationary_check(u0: np.ndarray, x: np.ndarray, nl: Nonlinearity, alpha: float, ell: float) -> Reason | None:
    if x[0] < -ell - ORDER_TOL or x[-1] > ell + ORDER_TOL:
        return None
    V = profile_V(nl, alpha, 400)
    gap = V(x + ell) - u0
    if float(np.min(gap)) >= -ORDER_TOL and float(np.max(gap)) > ORDER_TOL:
        return Reason(BELOW_STATIONARY, float(np.max(gap)), "u0 <= V_alpha(x + ell), not identical")
    return None


def vanishing_certificate(data: InitialData | ValidatedInitial, nl: Nonlinearity, alpha: float) -> Reason | None:
    """First sufficient condition for vanishing that holds, or None."""
    init = data if isinstance(data, ValidatedInitial) else validate_initial(data)
    u0, x = init.u0, init.x

    crit = critical_resistance(nl)
    if crit.cond3_holds:
        a0 = crit.alpha0
        if alpha > a0 and not _equal_alpha(alpha, a0):
            return Reason(ALPHA_ABOVE_CRITICAL, alpha - a0, f"alpha0={a0:.12g}")
        if _equal_alpha(alpha, a0):
            B = crossing_B(nl, alpha)
            if B is None or crit.sup_at_cap:
                return Reason(CRITICAL_UNATTAINED, 0.0, "2F(v) < alpha0^2 for every v in the domain")
            reason = _plateau_check(u0, x, init.h0, nl, alpha)
            if reason is not None:
                return reason
        else:
            sc = classify_stationary(nl, alpha)
            if sc.is_compact:
                reason = _stationary_check(u0, x, nl, alpha, sc.ell)
                if reason is not None:
                    return reason

    cls = classify_nonlinearity(nl)
    if cls.kind == "bistable":
        theta = cls.theta
        peak = float(np.max(u0))
        if peak <= theta:
            return Reason(BELOW_THETA, theta - peak, f"max u0 = {peak:.6g} <= theta = {theta:.6g}")
        K = growth_constant(nl)
        mass = float(integrate.trapezoid(u0, x))
        bound = theta * math.sqrt(2.0 * math.pi / (math.e * K))
        if mass <= bound:
            return Reason(SMALL_MASS, bound - mass, f"L1 norm {mass:.6g} <= {bound:.6g} (K={K:.6g})")
    return None
