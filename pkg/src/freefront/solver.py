"""Time integration of u_t = u_xx + f(u) on [g(t), h(t)] with resistant free boundaries

    g' = -u_x(g) + alpha,   h' = -u_x(h) - alpha,   u(g) = u(h) = 0.

The moving interval is mapped to xi in [0, 1] (x = g + xi (h - g)); in these
coordinates w(t, xi) = u(t, x) obeys

    w_t = w_xixi / L^2 + [(1 - xi) g' + xi h'] w_xi / L + f(w),   L = h - g.

Diffusion and the grid-motion convection are taken implicitly (one tridiagonal
solve per step), reaction and the boundary motion explicitly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable

import numpy as np
from scipy import interpolate, linalg

from .nonlinearity import DomainError, Nonlinearity, lipschitz_bound

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps

SHRINK_VANISH = "shrink_vanish"
HORIZON = "horizon"
OVERFLOW = "domain_overflow"
FAILURE = "numerical_failure"


class InitialDataError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    n: int = 400
    cfl: float = 0.4
    dt_max: float = 0.01
    dt_min: float = 1e-12
    fixed_dt: float | None = None
    eps_shrink: float = 1e-4
    eps_vanish: float = 1e-4
    x_max: float = 400.0
    t_horizon: float = 500.0
    dx_max: float = 0.1
    dx_min: float | None = None
    checkpoint_dt: float = 1.0
    record_every: int = 1
    boundary_pc: bool = False
    tol_bound: float = 1e-6
    monotone_tol: float = 1e-8

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RunConfig:
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**known)


# -- initial data -------------------------------------------------------------


@dataclass(frozen=True)
class InitialData:
    """phi sampled on a uniform grid of [-h0, h0], its endpoint slopes, and the multiplier sigma."""

    h0: float
    phi: np.ndarray = field(repr=False)
    slope_left: float | None = None
    slope_right: float | None = None
    sigma: float = 1.0
    label: str = "custom"

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.h0, self.h0, self.phi.size)

    def with_sigma(self, sigma: float) -> InitialData:
        return replace(self, sigma=float(sigma))

    @classmethod
    def cosine(cls, h0: float = 1.0, sigma: float = 1.0, n: int = 400) -> InitialData:
        x = np.linspace(-h0, h0, n + 1)
        phi = np.cos(0.5 * np.pi * x / h0)
        phi[0] = phi[-1] = 0.0
        s = 0.5 * np.pi / h0
        return cls(h0, phi, s, -s, sigma, "cosine")

    @classmethod
    def from_function(
        cls,
        fun: Callable,
        h0: float,
        sigma: float = 1.0,
        n: int = 400,
        dfun: Callable | None = None,
        label: str = "custom",
    ) -> InitialData:
        x = np.linspace(-h0, h0, n + 1)
        phi = np.asarray(fun(x), dtype=float)
        sl = sr = None
        if dfun is not None:
            sl, sr = float(dfun(-h0)), float(dfun(h0))
        return cls(h0, phi, sl, sr, sigma, label)


@dataclass(frozen=True)
class ValidatedInitial:
    h0: float
    x: np.ndarray = field(repr=False)
    u0: np.ndarray = field(repr=False)
    sigma: float
    slope_left: float
    slope_right: float
    label: str = "custom"

    @property
    def c1_norm(self) -> float:
        return float(np.max(np.abs(self.u0)) + np.max(np.abs(np.gradient(self.u0, self.x))))


def _one_sided_slopes(phi: np.ndarray, dx: float) -> tuple[float, float, float, float]:
    left = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * dx)
    right = (3.0 * phi[-1] - 4.0 * phi[-2] + phi[-3]) / (2.0 * dx)
    # stencil truncation scale ~ dx^2 |phi'''|
    tl = 4.0 * abs(phi[3] - 3 * phi[2] + 3 * phi[1] - phi[0]) / dx
    tr = 4.0 * abs(phi[-1] - 3 * phi[-2] + 3 * phi[-3] - phi[-4]) / dx
    return left, right, tl, tr


def validate_initial(data: InitialData) -> ValidatedInitial:
    """Check membership of phi in the admissible class and scale by sigma."""
    phi = np.asarray(data.phi, dtype=float)
    if not (data.h0 > 0 and math.isfinite(data.h0)):
        raise InitialDataError("h0 must be positive")
    if not data.sigma > 0:
        raise InitialDataError("sigma must be positive")
    if phi.ndim != 1 or phi.size < 5:
        raise InitialDataError("phi needs at least five samples")
    if not np.all(np.isfinite(phi)):
        raise InitialDataError("phi has non-finite samples")
    peak = float(np.max(np.abs(phi)))
    if peak == 0.0:
        raise InitialDataError("phi vanishes identically")
    if abs(phi[0]) > 1e-12 * peak or abs(phi[-1]) > 1e-12 * peak:
        raise InitialDataError("phi must vanish at both endpoints")
    if np.any(phi[1:-1] <= 0):
        i = int(np.argmax(phi[1:-1] <= 0)) + 1
        raise InitialDataError(f"phi must be positive in the interior (fails at x={data.x[i]:.6g})")
    dx = 2.0 * data.h0 / (phi.size - 1)
    left, right, tl, tr = _one_sided_slopes(phi, dx)
    floor = 1e-10 * peak / data.h0
    if left <= max(tl, floor) or (data.slope_left is not None and not data.slope_left > 0):
        raise InitialDataError("phi'(-h0) > 0 is required")
    if -right <= max(tr, floor) or (data.slope_right is not None and not data.slope_right < 0):
        raise InitialDataError("phi'(h0) < 0 is required")
    sl = data.slope_left if data.slope_left is not None else left
    sr = data.slope_right if data.slope_right is not None else right
    phi = phi.copy()
    phi[0] = phi[-1] = 0.0
    s = float(data.sigma)
    return ValidatedInitial(data.h0, data.x, s * phi, s, s * sl, s * sr, data.label)


# -- state and stepping -------------------------------------------------------


@dataclass(frozen=True)
class SolverState:
    t: float
    g: float
    h: float
    u: np.ndarray = field(repr=False)
    gprime: float
    hprime: float

    @property
    def n(self) -> int:
        return self.u.size - 1

    @property
    def width(self) -> float:
        return self.h - self.g

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.u.size)

    @property
    def x(self) -> np.ndarray:
        return self.g + self.xi * self.width

    @property
    def dx(self) -> float:
        return self.width / self.n

    @property
    def max_u(self) -> float:
        return float(np.max(self.u))


def boundary_speeds(u: np.ndarray, L: float, alpha: float) -> tuple[float, float]:
    """(g', h') from second-order one-sided differences of w at xi = 0 and xi = 1."""
    n = u.size - 1
    two_dxi = 2.0 / n
    wx0 = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / two_dxi
    wx1 = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / two_dxi
    return -wx0 / L + alpha, -wx1 / L - alpha


def make_state(t: float, g: float, h: float, u: np.ndarray, alpha: float) -> SolverState:
    gp, hp = boundary_speeds(u, h - g, alpha)
    return SolverState(t, g, h, u, gp, hp)


def initial_state(init: ValidatedInitial, alpha: float, n: int) -> SolverState:
    xi = np.linspace(0.0, 1.0, n + 1)
    if init.u0.size == n + 1:
        u = init.u0.copy()
    else:
        spl = interpolate.CubicSpline(init.x, init.u0)
        u = spl(-init.h0 + 2.0 * init.h0 * xi)
    u[0] = u[-1] = 0.0
    return make_state(0.0, -init.h0, init.h0, u, alpha)


def _advance(state: SolverState, nl: Nonlinearity, alpha: float, dt: float, gp: float, hp: float) -> SolverState:
    u = state.u
    n = u.size - 1
    dxi = 1.0 / n
    g1 = state.g + dt * gp
    h1 = state.h + dt * hp
    L1 = h1 - g1
    if not (L1 > 0 and math.isfinite(L1)):
        raise NumericalFailure(f"interval collapsed to width {L1!r} at t={state.t:.6g}")
    xi = np.arange(1, n) * dxi
    D = 1.0 / (L1 * L1)
    V = ((1.0 - xi) * gp + xi * hp) / L1
    diff = D / (dxi * dxi)
    lower = np.full(n - 1, diff)
    upper = np.full(n - 1, diff)
    diag = np.full(n - 1, -2.0 * diff)
    # centred convection where the cell Peclet number allows it, upwind elsewhere
    central = np.abs(V) * dxi <= 2.0 * D
    cv = V / (2.0 * dxi)
    lower -= np.where(central, cv, np.where(V < 0, V / dxi, 0.0))
    upper += np.where(central, cv, np.where(V > 0, V / dxi, 0.0))
    diag += np.where(central, 0.0, -np.abs(V) / dxi)

    ab = np.empty((3, n - 1))
    ab[0, 1:] = -dt * upper[:-1]
    ab[0, 0] = 0.0
    ab[1] = 1.0 - dt * diag
    ab[2, :-1] = -dt * lower[1:]
    ab[2, -1] = 0.0
    wi = u[1:-1]
    rhs = wi + dt * nl.f(wi)
    w_new = np.empty(n + 1)
    w_new[0] = w_new[-1] = 0.0
    w_new[1:-1] = linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
    if not np.all(np.isfinite(w_new)):
        raise NumericalFailure(f"non-finite values at t={state.t + dt:.6g}")
    return make_state(state.t + dt, g1, h1, w_new, alpha)


def step(state: SolverState, nl: Nonlinearity, alpha: float, dt: float, predictor_corrector: bool = False) -> SolverState:
    """Advance by dt. Boundary speeds come from the current profile (explicit coupling).

    With ``predictor_corrector`` the speeds are averaged with those of a
    predicted state (Heun's method on g and h).
    """
    new = _advance(state, nl, alpha, dt, state.gprime, state.hprime)
    if predictor_corrector:
        gp = 0.5 * (state.gprime + new.gprime)
        hp = 0.5 * (state.hprime + new.hprime)
        new = _advance(state, nl, alpha, dt, gp, hp)
    return new


def regrid(state: SolverState, n_new: int, alpha: float | None = None) -> SolverState:
    """Resample w onto n_new + 1 nodes with a not-a-knot cubic spline."""
    n_new = int(n_new)
    if n_new < 4:
        raise ValueError("need at least 4 intervals")
    spl = interpolate.CubicSpline(state.xi, state.u)
    u = spl(np.linspace(0.0, 1.0, n_new + 1))
    u[0] = u[-1] = 0.0
    if alpha is None:
        return SolverState(state.t, state.g, state.h, u, state.gprime, state.hprime)
    return make_state(state.t, state.g, state.h, u, alpha)


# -- trajectories ---------------------------------------------------------------


@dataclass(frozen=True)
class Checkpoint:
    t: float
    g: float
    h: float
    u: np.ndarray = field(repr=False)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.g, self.h, self.u.size)

    @property
    def dx(self) -> float:
        return (self.h - self.g) / (self.u.size - 1)


@dataclass
class Trajectory:
    t: np.ndarray
    g: np.ndarray
    h: np.ndarray
    gprime: np.ndarray
    hprime: np.ndarray
    max_u: np.ndarray
    checkpoints: list[Checkpoint]
    termination: str
    final: SolverState
    T_star: float | None = None
    events: dict[str, Any] = field(default_factory=dict)
    monitors: dict[str, Any] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def h0(self) -> float:
        return float(self.meta["h0"])

    @property
    def alpha(self) -> float:
        return float(self.meta["alpha"])

    @property
    def steps(self) -> int:
        return int(self.meta.get("steps", self.t.size))

    def truncated(self, t_end: float) -> Trajectory:
        """Copy ending at the last record with t <= t_end, as if the horizon were there."""
        k = int(np.searchsorted(self.t, t_end, side="right"))
        k = max(k, 1)
        cps = [c for c in self.checkpoints if c.t <= self.t[k - 1] + 1e-12]
        last = cps[-1] if cps else None
        final = self.final
        if last is not None and last.t < self.final.t:
            final = make_state(last.t, last.g, last.h, last.u, self.alpha)
        return Trajectory(
            t=self.t[:k],
            g=self.g[:k],
            h=self.h[:k],
            gprime=self.gprime[:k],
            hprime=self.hprime[:k],
            max_u=self.max_u[:k],
            checkpoints=cps,
            termination=HORIZON,
            final=final,
            T_star=None,
            events=dict(self.events, truncated_at=float(self.t[k - 1])),
            monitors=self.monitors,
            meta=self.meta,
        )


class _Monitors:
    """Running checks of the a priori bounds along a trajectory."""

    def __init__(self, nl: Nonlinearity, alpha: float, init: ValidatedInitial, cfg: RunConfig):
        self.nl = nl
        self.alpha = alpha
        self.h0 = init.h0
        self.c1_norm = init.c1_norm
        self.cfg = cfg
        self.C1 = 0.0
        self.ceiling = math.inf
        self.counts = {
            "positivity": 0,
            "speed_lower": 0,
            "speed_upper": 0,
            "center": 0,
            "monotone": 0,
        }
        self.first: dict[str, float] = {}
        self.worst_center_margin = math.inf
        self.worst_speed_margin = math.inf
        self.checked_steps = 0

    def _flag(self, name: str, t: float) -> None:
        self.counts[name] += 1
        self.first.setdefault(name, t)

    def _update_ceiling(self, c1: float) -> None:
        # M from the barrier U = C1 [2M(h - x) - M^2 (h - x)^2]; ceiling is 2 M C1 - alpha
        self.C1 = c1
        nl = self.nl if c1 <= self.nl.domain_cap else self.nl.with_cap(c1)
        k1 = lipschitz_bound(nl, c1)
        a = self.alpha
        M = max((a + math.sqrt(a * a + 2.0 * k1)) / 2.0, 4.0 * self.c1_norm / (3.0 * c1))
        self.ceiling = 2.0 * M * c1 - a

    def check(self, s: SolverState) -> None:
        self.checked_steps += 1
        mu = float(np.max(s.u))
        if mu > self.C1 * (1.0 + 1e-3) or self.C1 == 0.0:
            self._update_ceiling(mu * (1.0 + 1e-3))
        if float(np.min(s.u)) < -10.0 * EPS * mu:
            self._flag("positivity", s.t)
        tb = self.cfg.tol_bound
        margin = min(s.hprime + self.alpha, self.alpha - s.gprime)
        self.worst_speed_margin = min(self.worst_speed_margin, margin)
        if not (s.hprime > -self.alpha - tb and s.gprime < self.alpha + tb):
            self._flag("speed_lower", s.t)
        if s.hprime > self.ceiling + tb or -s.gprime > self.ceiling + tb:
            self._flag("speed_upper", s.t)
        slack = 2.0 * self.h0 + 10.0 * s.dx
        c = abs(s.g + s.h)
        self.worst_center_margin = min(self.worst_center_margin, slack - c)
        if not c < slack:
            self._flag("center", s.t)

    def check_monotone(self, s: SolverState) -> None:
        x = s.x
        tol = self.cfg.monotone_tol
        if s.g < -self.h0:
            seg = s.u[x <= -self.h0]
            if seg.size > 1 and np.min(np.diff(seg)) < -tol:
                self._flag("monotone", s.t)
        if s.h > self.h0:
            seg = s.u[x >= self.h0]
            if seg.size > 1 and np.max(np.diff(seg)) > tol:
                self._flag("monotone", s.t)

    def report(self) -> dict[str, Any]:
        return {
            "violations": dict(self.counts),
            "first_violation": dict(self.first),
            "worst_center_margin": self.worst_center_margin,
            "worst_speed_margin": self.worst_speed_margin,
            "speed_ceiling": self.ceiling,
            "checked_steps": self.checked_steps,
        }

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def _corollary_width(nl: Nonlinearity, alpha: float) -> float | None:
    from .phase_plane import classify_stationary

    try:
        sc = classify_stationary(nl, alpha)
    except Exception:  # diagnostic only
        return None
    return 2.0 * sc.ell if sc.is_compact else None


def simulate(
    data: InitialData | ValidatedInitial,
    nl: Nonlinearity,
    alpha: float,
    cfg: RunConfig | None = None,
    *,
    state: SolverState | None = None,
) -> Trajectory:
    """Run until shrinking/vanishing, the horizon, domain overflow, or a numerical failure.

    ``state`` overrides the start (e.g. a sampled stationary profile); the
    initial data then only supplies h0 and the C^1 norm for the monitors.
    """
    cfg = cfg or RunConfig()
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    init = data if isinstance(data, ValidatedInitial) else validate_initial(data)
    peak0 = float(np.max(init.u0)) if state is None else float(np.max(state.u))
    if peak0 > nl.domain_cap:
        if not nl.is_closed_form:
            raise DomainError(f"initial data reaches {peak0:.6g} beyond the tabulated range {nl.domain_cap:.6g}")
        nl = nl.with_cap(2.0 * peak0)
    if state is None:
        state = initial_state(init, alpha, cfg.n)
    n_base = cfg.n
    dx_min = cfg.dx_min if cfg.dx_min is not None else cfg.dx_max / 4.0

    mon = _Monitors(nl, alpha, init, cfg)
    mon.check(state)
    two_ell = _corollary_width(nl, alpha)

    ts, gs, hs, gps, hps, mus = [], [], [], [], [], []

    def record(s: SolverState) -> None:
        ts.append(s.t)
        gs.append(s.g)
        hs.append(s.h)
        gps.append(s.gprime)
        hps.append(s.hprime)
        mus.append(float(np.max(s.u)))

    checkpoints = [Checkpoint(state.t, state.g, state.h, state.u.copy())]
    next_cp = state.t + cfg.checkpoint_dt
    record(state)
    events: dict[str, Any] = {"t_shrink_first": None, "t_vanish_first": None, "corollary_spread_time": None}
    termination = HORIZON
    T_star = None
    steps = 0
    message = ""

    while True:
        L = state.width
        mu = float(np.max(state.u))
        if L <= cfg.eps_shrink and events["t_shrink_first"] is None:
            events["t_shrink_first"] = state.t
        if mu <= cfg.eps_vanish and events["t_vanish_first"] is None:
            events["t_vanish_first"] = state.t
        if L <= cfg.eps_shrink and mu <= cfg.eps_vanish:
            termination, T_star = SHRINK_VANISH, state.t
            break
        if state.h > cfg.x_max or state.g < -cfg.x_max:
            termination = OVERFLOW
            break
        if state.t >= cfg.t_horizon - 1e-12:
            termination = HORIZON
            break
        if two_ell is not None and events["corollary_spread_time"] is None:
            if state.h > init.h0 + two_ell or state.g < -init.h0 - two_ell:
                events["corollary_spread_time"] = state.t

        if cfg.fixed_dt is not None:
            dt = cfg.fixed_dt
        else:
            dt = cfg.dt_max
            speed = abs(state.gprime) + abs(state.hprime)
            if speed > 0:
                dt = min(dt, cfg.cfl * L / speed)
            try:
                kf = float(np.max(np.abs(nl.df(state.u))))
            except DomainError as exc:
                termination, message = FAILURE, str(exc)
                break
            if kf > 0:
                dt = min(dt, cfg.cfl / kf)
            if dt < cfg.dt_min:
                if L <= 10.0 * cfg.eps_shrink:
                    termination, T_star = SHRINK_VANISH, state.t
                    events["dt_floor"] = True
                else:
                    termination, message = FAILURE, f"time step {dt:.3e} below floor at width {L:.3e}"
                break
        dt = min(dt, cfg.t_horizon - state.t)
        landing = next_cp - state.t
        hit_cp = dt >= landing - 1e-14
        if hit_cp:
            dt = landing

        try:
            new = step(state, nl, alpha, dt, cfg.boundary_pc)
        except (NumericalFailure, DomainError, linalg.LinAlgError, ValueError) as exc:
            termination, message = FAILURE, str(exc)
            break
        if hit_cp:
            new = replace(new, t=next_cp)
        state = new
        steps += 1

        n = state.n
        if state.dx > cfg.dx_max:
            n_new = n
            while state.width / n_new > cfg.dx_max:
                n_new *= 2
            state = regrid(state, n_new, alpha)
        elif state.dx < dx_min and n // 2 >= n_base:
            n_new = n
            while state.width / n_new < dx_min and n_new // 2 >= n_base:
                n_new //= 2
            state = regrid(state, n_new, alpha)

        mon.check(state)
        if steps % cfg.record_every == 0:
            record(state)
        if hit_cp:
            mon.check_monotone(state)
            checkpoints.append(Checkpoint(state.t, state.g, state.h, state.u.copy()))
            next_cp += cfg.checkpoint_dt

    if ts[-1] != state.t:
        record(state)
    if checkpoints[-1].t != state.t:
        checkpoints.append(Checkpoint(state.t, state.g, state.h, state.u.copy()))
    if events["t_shrink_first"] is not None and events["t_vanish_first"] is not None:
        events["equiv_lag"] = abs(events["t_shrink_first"] - events["t_vanish_first"])
    if message:
        events["failure"] = message
        logger.warning("simulation stopped: %s", message)

    meta = {
        "h0": init.h0,
        "alpha": alpha,
        "sigma": init.sigma,
        "phi": init.label,
        "nonlinearity": nl.to_config() if nl.kind != "tabulated" else {"kind": "tabulated", "nodes": len(nl.nodes)},
        "config": cfg.to_dict(),
        "steps": steps,
        "n_final": state.n,
    }
    return Trajectory(
        t=np.asarray(ts),
        g=np.asarray(gs),
        h=np.asarray(hs),
        gprime=np.asarray(gps),
        hprime=np.asarray(hps),
        max_u=np.asarray(mus),
        checkpoints=checkpoints,
        termination=termination,
        final=state,
        T_star=T_star,
        events=events,
        monitors=mon.report(),
        meta=meta,
    )
