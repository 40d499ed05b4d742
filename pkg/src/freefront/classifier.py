"""Turn a finished trajectory into spreading / vanishing / transition / undetermined,
plus the front-speed diagnostic and the ordered-pair comparison harness."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .nonlinearity import Nonlinearity
from .phase_plane import StationaryClass, StationaryProfile
from .solver import FAILURE, HORIZON, OVERFLOW, SHRINK_VANISH, Trajectory

logger = logging.getLogger(__name__)

SPREADING = "spreading"
VANISHING = "vanishing"
TRANSITION = "transition"
UNDETERMINED = "undetermined"


class DiagnosticError(ValueError):
    pass


class HarnessError(ValueError):
    pass


@dataclass
class ClassifierConfig:
    """Verdict conventions. None of these are model quantities."""

    tail_fraction: float = 0.2
    speed_rel: float = 0.10
    plateau_rel: float = 0.05
    width_rel: float = 0.05
    eps_stall: float = 1e-5
    profile_rel: float = 0.05
    equiv_window: float = 1.0  # on top of the retreat time L / (2 alpha)
    limit_slack_dx: float = 10.0

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ClassifierConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown classifier settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Outcome:
    verdict: str
    T_star: float | None = None
    width: float | None = None
    profile_error: float | None = None
    reason: str | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def decisive(self) -> bool:
        return self.verdict in (SPREADING, VANISHING)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def centered_profile_error(traj: Trajectory, profile: StationaryProfile, state=None) -> float:
    """Sup distance between the final profile and V_alpha shifted to the same centre."""
    s = traj.final if state is None else state
    x = s.x
    shift = 0.5 * (s.g + s.h) - profile.ell
    ref = profile(x - shift)
    return float(np.max(np.abs(s.u - ref)))


def _tail(traj: Trajectory, frac: float) -> np.ndarray:
    t_end = traj.t[-1]
    return traj.t >= t_end - frac * (t_end - traj.t[0])


def detect_outcome(
    traj: Trajectory,
    sc: StationaryClass | None,
    cstar: float | None = None,
    nl: Nonlinearity | None = None,
    cfg: ClassifierConfig | None = None,
    profile: StationaryProfile | None = None,
) -> Outcome:
    """Classify a terminated trajectory.

    ``nl`` supplies the spreading plateau (positive stable zero of f); without
    it the plateau is taken to be 1.
    """
    cfg = cfg or ClassifierConfig()
    diag: dict[str, Any] = {"termination": traj.termination}
    plateau = nl.positive_stable_zero() if nl is not None else 1.0
    final = traj.final
    n0 = int(traj.meta.get("config", {}).get("n", max(final.n, 1)))
    dx0 = 2.0 * traj.h0 / n0

    if traj.termination == FAILURE:
        return Outcome(UNDETERMINED, reason="numerical failure: " + str(traj.events.get("failure", "")), diagnostics=diag)

    if traj.termination == SHRINK_VANISH:
        solver_cfg = traj.meta.get("config", {})
        eps_s = solver_cfg.get("eps_shrink", 1e-4)
        eps_v = solver_cfg.get("eps_vanish", 1e-4)
        lag = traj.events.get("equiv_lag")
        lag = 0.0 if lag is None else float(lag)
        # Once u is below eps_vanish both fronts retreat at about alpha, so an
        # interval of width L needs about L / (2 alpha) to close; allow that.
        firsts = [traj.events.get("t_shrink_first"), traj.events.get("t_vanish_first")]
        firsts = [t for t in firsts if t is not None]
        width_first = float(np.interp(min(firsts), traj.t, traj.h - traj.g)) if firsts else 0.0
        retreat = width_first / (2.0 * traj.alpha)
        window = retreat + cfg.equiv_window
        center = 0.5 * (final.g + final.h)
        slack = cfg.limit_slack_dx * dx0
        in_range = -traj.h0 - slack <= center <= traj.h0 + slack
        if not in_range:
            logger.warning("vanishing limit %.6g outside [-h0, h0] by more than %.3g", center, slack)
        diag.update(
            {
                "limit_point": center,
                "limit_in_range": in_range,
                "equiv_lag": lag,
                "equiv_window": window,
                "width_at_T": final.width,
                "max_u_at_T": final.max_u,
                "width_ok": final.width <= eps_s * (1 + 1e-9) or bool(traj.events.get("dt_floor")),
                "max_u_ok": final.max_u <= eps_v * (1 + 1e-9),
            }
        )
        if lag > window:
            return Outcome(
                UNDETERMINED,
                reason=f"shrink and vanish triggers {lag:.3g} apart (window {window:.3g})",
                diagnostics=diag,
            )
        return Outcome(VANISHING, T_star=traj.T_star, diagnostics=diag)

    if traj.termination == OVERFLOW:
        confirmed = plateau is not None and abs(final.max_u - plateau) <= cfg.plateau_rel * plateau
        diag.update({"presumptive": not confirmed, "max_u": final.max_u, "plateau": plateau})
        if traj.events.get("corollary_spread_time") is not None:
            diag["corollary_spread_time"] = traj.events["corollary_spread_time"]
        return Outcome(SPREADING, width=final.width, diagnostics=diag)

    # horizon reached
    failed: list[str] = []
    tail = _tail(traj, cfg.tail_fraction)
    if np.count_nonzero(tail) >= 2:
        vr = float(np.mean(traj.hprime[tail]))
        vl = float(np.mean(-traj.gprime[tail]))
    else:
        vr = vl = 0.0
    diag.update({"mean_right_speed": vr, "mean_left_speed": vl, "max_u": final.max_u})
    moving = vr > 0 and vl > 0 and abs(vr - vl) <= cfg.speed_rel * max(vr, vl)
    at_plateau = plateau is not None and abs(final.max_u - plateau) <= cfg.plateau_rel * plateau
    if moving and at_plateau:
        return Outcome(SPREADING, width=final.width, diagnostics=dict(diag, presumptive=False))
    if not moving:
        failed.append("fronts not advancing at matched speeds")
    if not at_plateau:
        failed.append("interior not at the spreading plateau")

    if sc is not None and sc.is_compact:
        two_ell = 2.0 * sc.ell
        width_err = abs(final.width - two_ell)
        stall = abs(final.hprime) + abs(final.gprime)
        if profile is None:
            from .phase_plane import profile_V

            profile = profile_V(nl, sc.alpha, 400) if nl is not None else None
        perr = centered_profile_error(traj, profile) if profile is not None else math.inf
        diag.update({"width_error": width_err, "stall": stall, "profile_error": perr, "two_ell": two_ell})
        ok_w = width_err <= cfg.width_rel * two_ell
        ok_s = stall <= cfg.eps_stall
        ok_p = perr <= cfg.profile_rel * sc.B
        if ok_w and ok_s and ok_p:
            return Outcome(TRANSITION, width=final.width, profile_error=perr, diagnostics=diag)
        if not ok_w:
            failed.append(f"width {final.width:.6g} not within {cfg.width_rel:g} of 2ell={two_ell:.6g}")
        if not ok_s:
            failed.append(f"boundaries not stalled (|g'|+|h'|={stall:.3g})")
        if not ok_p:
            failed.append(f"profile error {perr:.3g} exceeds {cfg.profile_rel:g}*B")
        return Outcome(UNDETERMINED, width=final.width, profile_error=perr, reason="; ".join(failed), diagnostics=diag)

    failed.append("transition check disabled (no compactly supported stationary profile)")
    return Outcome(UNDETERMINED, width=final.width, reason="; ".join(failed), diagnostics=diag)


# -- spreading speed ---------------------------------------------------------------


@dataclass
class SpeedReport:
    slope: float
    drift: float
    rel_error: float | None
    left_slope: float
    left_drift: float
    left_rel_error: float | None
    window: tuple[float, float]


def spreading_speed(traj: Trajectory, cstar: float | None = None, min_samples: int = 10) -> SpeedReport:
    """Least-squares front speeds over the second half of the run."""
    t_end = traj.t[-1]
    m = traj.t >= traj.t[0] + 0.5 * (t_end - traj.t[0])
    if np.count_nonzero(m) < min_samples:
        raise DiagnosticError(f"only {np.count_nonzero(m)} samples in the fitting window")
    t = traj.t[m]

    def fit(y):
        slope, icpt = np.polyfit(t, y, 1)
        resid = y - slope * t
        return float(slope), float(np.max(resid) - np.min(resid))

    s, d = fit(traj.h[m])
    sl, dl = fit(-traj.g[m])
    rel = abs(s - cstar) / cstar if cstar else None
    rel_l = abs(sl - cstar) / cstar if cstar else None
    return SpeedReport(s, d, rel, sl, dl, rel_l, (float(t[0]), float(t[-1])))


# -- comparison harness ---------------------------------------------------------


@dataclass
class OrderingReport:
    ok: bool
    checked: int
    min_g_margin: float
    min_h_margin: float
    min_u_margin: float
    violations: list[dict[str, float]] = field(default_factory=list)


def compare_runs(lo: Trajectory, hi: Trajectory, tol_factor: float = 5.0) -> OrderingReport:
    """Check that a dominated run stays below a dominating one at every shared checkpoint."""
    c_lo, c_hi = lo.checkpoints[0], hi.checkpoints[0]
    if c_lo.t != 0.0 or c_hi.t != 0.0:
        raise HarnessError("both runs need an initial checkpoint")
    if c_lo.g < c_hi.g - 1e-12 or c_lo.h > c_hi.h + 1e-12:
        raise HarnessError("initial support of the lower run is not contained in the upper one")
    # Linear interpolation of the upper data can undershoot by up to max|second difference| / 8.
    slack = 1e-12 + float(np.max(np.abs(np.diff(c_hi.u, 2)))) / 8.0
    if np.any(c_lo.u > np.interp(c_lo.x, c_hi.x, c_hi.u, left=0.0, right=0.0) + slack):
        raise HarnessError("initial data are not ordered")

    hi_by_t = {round(c.t, 9): c for c in hi.checkpoints}
    violations = []
    mg = mh = mu = math.inf
    checked = 0
    for a in lo.checkpoints:
        b = hi_by_t.get(round(a.t, 9))
        if b is None:
            continue
        checked += 1
        tol = tol_factor * max(a.dx, b.dx)
        gm = a.g - b.g
        hm = b.h - a.h
        lo_x = max(a.g, b.g)
        hi_x = min(a.h, b.h)
        xs = a.x[(a.x >= lo_x) & (a.x <= hi_x)]
        if xs.size:
            um = float(np.min(np.interp(xs, b.x, b.u) - np.interp(xs, a.x, a.u)))
        else:
            um = math.inf
        mg, mh, mu = min(mg, gm), min(mh, hm), min(mu, um)
        if gm < -tol or hm < -tol or um < -tol:
            violations.append({"t": a.t, "g_margin": gm, "h_margin": hm, "u_margin": um, "tol": tol})
    return OrderingReport(not violations, checked, mg, mh, mu, violations)
