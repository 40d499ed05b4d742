"""Semi-wave q'' - c q' + f(q) = 0 on (0, inf), q(0) = 0, q'(0) = c + alpha, q(inf) = 1.

The asymptotic front speed c* is found by shooting forward from z = 0 and
bisecting on c between an overshooting and an undershooting launch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .nonlinearity import Nonlinearity, classify_nonlinearity
from .phase_plane import PreconditionError

EPS_OVER = 1e-8
EPS_UNDER = 1e-8
EPS_CONNECT = 1e-6
Z_MAX = 200.0


class ShootingError(RuntimeError):
    """Integrator failure or missing bisection bracket."""


@dataclass(frozen=True)
class ShotResult:
    kind: str  # "overshoot" | "undershoot" | "connect"
    z_end: float
    z: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    dq: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SemiWaveResult:
    c_star: float
    alpha: float
    bracket: tuple[float, float]
    z: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    z_join: float  # integrated part ends here, the linearized tail starts
    residual_at_one: float
    polarity: str  # class of the shot just below c*

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def summary(self) -> dict:
        return {
            "c_star": self.c_star,
            "alpha": self.alpha,
            "bracket": list(self.bracket),
            "bracket_width": self.bracket_width,
            "residual": self.residual_at_one,
            "z_join": self.z_join,
            "polarity_below": self.polarity,
        }


def shoot(
    nl: Nonlinearity,
    alpha: float,
    c: float,
    rtol: float = 1e-10,
    z_max: float = Z_MAX,
) -> ShotResult:
    """Integrate from (q, q') = (0, c + alpha) and report how the orbit leaves."""
    if c < 0 or alpha <= 0:
        raise PreconditionError("need c >= 0 and alpha > 0")
    wide = nl.with_cap(max(nl.domain_cap, 2.0)) if nl.is_closed_form else nl
    top = wide.domain_cap

    def rhs(_z, y):
        q = min(max(y[0], 0.0), top)
        return [y[1], c * y[1] - float(wide.f(q))]

    over = lambda _z, y: y[0] - (1.0 + EPS_OVER)
    over.terminal = True
    over.direction = 1
    # q' reaching zero below 1 means the orbit turns back; near q = 1 it falls
    # through 1 - eps afterwards, so any turn counts as undershoot.
    turn = lambda _z, y: y[1]
    turn.terminal = True
    turn.direction = -1

    sol = integrate.solve_ivp(
        rhs,
        (0.0, z_max),
        [0.0, c + alpha],
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-2,
        events=(over, turn),
        dense_output=False,
    )
    if sol.status == -1:
        raise ShootingError(f"integrator failed at c={c!r}: {sol.message}")
    z, q, dq = sol.t, sol.y[0], sol.y[1]
    if sol.t_events[0].size:
        kind = "overshoot"
    elif sol.t_events[1].size:
        kind = "undershoot"
    elif abs(q[-1] - 1.0) <= EPS_CONNECT and abs(dq[-1]) <= EPS_CONNECT:
        kind = "connect"
    else:
        kind = "undershoot" if q[-1] < 1.0 else "overshoot"
    return ShotResult(kind, float(z[-1]), z, q, dq)


def _bracket(nl: Nonlinearity, alpha: float, rtol: float) -> tuple[float, str, float, str]:
    c_lo = 1e-3
    k_lo = shoot(nl, alpha, c_lo, rtol).kind
    while k_lo == "overshoot" and c_lo > 1e-12:
        c_lo /= 10.0
        k_lo = shoot(nl, alpha, c_lo, rtol).kind
    if k_lo == "connect":
        return c_lo, k_lo, c_lo, k_lo
    if k_lo == "overshoot":
        raise ShootingError("every scanned speed overshoots; no bracket for c*")
    c_hi = 1.0
    k_hi = shoot(nl, alpha, c_hi, rtol).kind
    while k_hi == k_lo:
        c_hi *= 2.0
        if c_hi > 1e6:
            raise ShootingError("no overshooting speed found below 1e6")
        k_hi = shoot(nl, alpha, c_hi, rtol).kind
    return c_lo, k_lo, c_hi, k_hi


def solve_cstar(
    nl: Nonlinearity,
    alpha: float,
    width: float = 1e-10,
    rtol: float = 1e-10,
    z_max: float = Z_MAX,
    n_tail: int = 2000,
) -> SemiWaveResult:
    """Speed c* and profile q* of the semi-wave."""
    cls = classify_nonlinearity(nl)
    if cls.kind not in ("monostable", "bistable"):
        raise PreconditionError(f"semi-wave needs a monostable or bistable f, got {cls}")
    limit = math.sqrt(2.0 * float(nl.F(1.0)))
    if not 0.0 < alpha < limit:
        raise PreconditionError(f"semi-wave exists only for 0 < alpha < sqrt(2F(1)) = {limit:.6g}")

    c_lo, k_lo, c_hi, k_hi = _bracket(nl, alpha, rtol)
    while c_hi - c_lo > width:
        mid = 0.5 * (c_lo + c_hi)
        if mid in (c_lo, c_hi):
            break
        k = shoot(nl, alpha, mid, rtol).kind
        if k == "connect":
            c_lo = c_hi = mid
            break
        if k == k_lo:
            c_lo = mid
        else:
            c_hi = mid
    c_star = 0.5 * (c_lo + c_hi)
    shot = shoot(nl, alpha, c_star, rtol, z_max)

    # Keep the orbit up to its closest approach to the saddle (1, 0), then
    # continue along the stable eigen-direction of the linearization there.
    dist = np.abs(shot.q - 1.0) + np.abs(shot.dq)
    j = int(np.argmin(dist))
    z_int, q_int = shot.z[: j + 1], shot.q[: j + 1]
    z_join = float(z_int[-1])
    f1 = float(nl.df(1.0))
    mu = 0.5 * (c_star - math.sqrt(c_star * c_star - 4.0 * f1))  # negative root
    if z_join < z_max:
        zt = np.linspace(z_join, z_max, n_tail + 1)[1:]
        qt = 1.0 + (q_int[-1] - 1.0) * np.exp(mu * (zt - z_join))
        z = np.concatenate([z_int, zt])
        q = np.concatenate([q_int, qt])
    else:
        z, q = z_int, q_int
    return SemiWaveResult(
        c_star=c_star,
        alpha=alpha,
        bracket=(c_lo, c_hi),
        z=z,
        q=q,
        z_join=z_join,
        residual_at_one=float(abs(q[-1] - 1.0)),
        polarity=k_lo,
    )


def profile_on_grid(res: SemiWaveResult, nl: Nonlinearity, z_grid: np.ndarray) -> np.ndarray:
    """Re-integrate the semi-wave at c* with dense output on ``z_grid`` (within the integrated part)."""
    wide = nl.with_cap(max(nl.domain_cap, 2.0)) if nl.is_closed_form else nl
    c = res.c_star

    def rhs(_z, y):
        return [y[1], c * y[1] - float(wide.f(min(max(y[0], 0.0), wide.domain_cap)))]

    sol = integrate.solve_ivp(
        rhs, (0.0, float(z_grid[-1])), [0.0, c + res.alpha], method="DOP853", rtol=1e-12, atol=1e-14, t_eval=z_grid
    )
    return sol.y[0]
