"""Bisection for the amplitude threshold sigma* between vanishing and spreading.

The template initial data phi is scaled by sigma. Each candidate costs one
full simulation, so the scan phase can fan out over a process pool while the
bisection itself is sequential.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from .classifier import (
    SPREADING,
    TRANSITION,
    UNDETERMINED,
    VANISHING,
    ClassifierConfig,
    Outcome,
    centered_profile_error,
    detect_outcome,
)
from .nonlinearity import Nonlinearity, classify_nonlinearity
from .phase_plane import PreconditionError, StationaryClass, classify_stationary, profile_V
from .solver import InitialData, RunConfig, simulate

logger = logging.getLogger(__name__)

SIGMA_CAP = 1e6
SIGMA_FLOOR = 1e-12
MAX_DOUBLINGS = 3
SPREAD_MARGIN = 1.02  # x_max = h0 + 2 ell * margin: past this the run is known to spread


@dataclass
class Evaluation:
    sigma: float
    verdict: str
    time: float  # T* for vanishing, final time otherwise
    horizon: float
    termination: str
    side: str  # "lo" (counted as not spreading) or "hi"


@dataclass
class ThresholdResult:
    sigma_lo: float | None
    sigma_hi: float | None
    midpoint_outcome: Outcome | None
    evaluations: list[Evaluation] = field(default_factory=list)
    infinite: bool = False
    inconclusive: bool = False
    midpoint_sigma: float | None = None
    midpoint_settle_time: float | None = None
    two_ell: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def width(self) -> float:
        if self.sigma_lo is None or self.sigma_hi is None:
            return math.inf
        return self.sigma_hi - self.sigma_lo

    def log_is_monotone(self) -> bool:
        """No vanishing verdict above a spreading one."""
        spread = [e.sigma for e in self.evaluations if e.side == "hi"]
        vanish = [e.sigma for e in self.evaluations if e.verdict == VANISHING]
        return not spread or not vanish or max(vanish) < min(spread)

    def to_dict(self) -> dict[str, Any]:
        d = {
            "sigma_lo": self.sigma_lo,
            "sigma_hi": self.sigma_hi,
            "width": None if math.isinf(self.width) else self.width,
            "infinite": self.infinite,
            "inconclusive": self.inconclusive,
            "midpoint_sigma": self.midpoint_sigma,
            "midpoint_settle_time": self.midpoint_settle_time,
            "two_ell": self.two_ell,
            "midpoint_outcome": None if self.midpoint_outcome is None else self.midpoint_outcome.to_dict(),
            "evaluations": [asdict(e) for e in self.evaluations],
            "notes": list(self.notes),
        }
        return d


def threshold_run_config(cfg: RunConfig | None, sc: StationaryClass, h0: float) -> RunConfig:
    """Shrink x_max to where spreading is already certain, unless the caller set a tighter one."""
    cfg = cfg or RunConfig()
    if sc.is_compact:
        cut = h0 + 2.0 * sc.ell * SPREAD_MARGIN
        if cut < cfg.x_max:
            cfg = replace(cfg, x_max=cut)
    return cfg


def _evaluate_once(args) -> tuple[float, str, float, float, str]:
    template, nl, alpha, cfg, ccfg, sc, sigma = args
    traj = simulate(template.with_sigma(sigma), nl, alpha, cfg)
    out = detect_outcome(traj, sc, nl=nl, cfg=ccfg, profile=None)
    t = float(traj.T_star if traj.T_star is not None else traj.t[-1])
    return sigma, out.verdict, t, cfg.t_horizon, traj.termination


def _evaluate(template, nl, alpha, cfg, ccfg, sc, sigma, max_doublings) -> tuple[Evaluation, bool]:
    """Verdict at one sigma; undecided runs are retried with a doubled horizon."""
    run_cfg = cfg
    for k in range(max_doublings + 1):
        s, verdict, t, hor, term = _evaluate_once((template, nl, alpha, run_cfg, ccfg, sc, sigma))
        if verdict in (VANISHING, SPREADING):
            side = "hi" if verdict == SPREADING else "lo"
            return Evaluation(sigma, verdict, t, hor, term, side), False
        if k < max_doublings:
            run_cfg = replace(run_cfg, t_horizon=2.0 * run_cfg.t_horizon)
    # Persistent undecided verdict: count as not spreading and flag it.
    return Evaluation(sigma, verdict, t, hor, term, "lo"), True


def _settle_time(traj, profile, sc: StationaryClass, ccfg: ClassifierConfig) -> float:
    """Checkpoint where the run is closest to stationary.

    Among checkpoints whose width and centred profile already match V_alpha,
    take the one with the slowest boundaries; the profile error alone is a
    poor guide because a departing solution can cross V_alpha.
    """
    best_t, best = None, math.inf
    fallback_t, fallback = traj.checkpoints[0].t, math.inf
    for cp in traj.checkpoints:
        s = _state(traj, cp)
        stall = abs(s.gprime) + abs(s.hprime)
        if stall < fallback:
            fallback_t, fallback = cp.t, stall
        if abs(s.width - 2.0 * sc.ell) > ccfg.width_rel * 2.0 * sc.ell:
            continue
        if centered_profile_error(traj, profile, state=s) > ccfg.profile_rel * sc.B:
            continue
        if stall < best:
            best_t, best = cp.t, stall
    return float(best_t if best_t is not None else fallback_t)


def _state(traj, cp):
    from .solver import make_state

    return make_state(cp.t, cp.g, cp.h, cp.u, traj.alpha)


def projected_runs(tol: float, sigma_guess: float = 1.0) -> int:
    """Rough number of simulations a threshold search will need."""
    scan = 1 + max(1, int(math.ceil(abs(math.log2(max(sigma_guess, 1e-12))))))
    bis = int(math.ceil(math.log2(max(sigma_guess, 1.0) / (tol * min(1.0, sigma_guess)))))
    return scan + max(bis, 0) + 1


def find_sigma_star(
    template: InitialData,
    nl: Nonlinearity,
    alpha: float,
    tol: float = 1e-3,
    cfg: RunConfig | None = None,
    ccfg: ClassifierConfig | None = None,
    sigma_cap: float = SIGMA_CAP,
    max_doublings: int = MAX_DOUBLINGS,
    jobs: int = 1,
    evaluate_midpoint: bool = True,
) -> ThresholdResult:
    """Bracket sigma* to hi - lo <= tol * min(1, hi) and classify the midpoint run."""
    cls = classify_nonlinearity(nl)
    if cls.kind not in ("monostable", "bistable"):
        raise PreconditionError(f"threshold search needs a monostable or bistable f, got {cls}")
    limit = math.sqrt(2.0 * float(nl.F(1.0)))
    if not 0.0 < alpha < limit:
        raise PreconditionError(f"need 0 < alpha < sqrt(2F(1)) = {limit:.6g}")
    ccfg = ccfg or ClassifierConfig()
    sc = classify_stationary(nl, alpha)
    cfg = threshold_run_config(cfg, sc, template.h0)
    res = ThresholdResult(None, None, None, two_ell=2.0 * sc.ell if sc.is_compact else None)

    def run(sigma: float) -> Evaluation:
        ev, undecided = _evaluate(template, nl, alpha, cfg, ccfg, sc, sigma, max_doublings)
        if undecided:
            res.inconclusive = True
            res.notes.append(f"sigma={sigma:.9g} undecided after {max_doublings} horizon doublings")
        res.evaluations.append(ev)
        logger.info("sigma=%.9g -> %s", sigma, ev.verdict)
        return ev

    def run_batch(sigmas: list[float]) -> list[Evaluation]:
        if jobs <= 1 or len(sigmas) == 1:
            return [run(s) for s in sigmas]
        args = [(template, nl, alpha, cfg, ccfg, sc, s) for s in sigmas]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            firsts = list(pool.map(_evaluate_once, args))
        out = []
        for s, verdict, t, hor, term in firsts:
            if verdict in (VANISHING, SPREADING):
                ev = Evaluation(s, verdict, t, hor, term, "hi" if verdict == SPREADING else "lo")
                res.evaluations.append(ev)
                out.append(ev)
            else:
                out.append(run(s))
        return out

    # exponential scan from sigma = 1
    first = run(1.0)
    lo = hi = None
    if first.side == "lo":
        lo = 1.0
        s = 1.0
        while hi is None:
            batch = []
            while len(batch) < max(jobs, 1) and s < sigma_cap:
                s = min(2.0 * s, sigma_cap)
                batch.append(s)
            if not batch:
                break
            for ev in run_batch(batch):
                if ev.side == "hi":
                    hi = ev.sigma if hi is None else min(hi, ev.sigma)
                elif hi is None:
                    lo = max(lo, ev.sigma)
            if s >= sigma_cap and hi is None:
                break
        if hi is None:
            res.sigma_lo, res.infinite = lo, True
            res.notes.append(f"no spreading up to sigma_cap={sigma_cap:g}")
            return res
    else:
        hi = 1.0
        s = 1.0
        while lo is None:
            batch = []
            while len(batch) < max(jobs, 1) and s > SIGMA_FLOOR:
                s = 0.5 * s
                batch.append(s)
            if not batch:
                raise RuntimeError("spreading persists down to the sigma floor")
            for ev in run_batch(batch):
                if ev.side == "lo":
                    lo = ev.sigma if lo is None else max(lo, ev.sigma)
                elif lo is None:
                    hi = min(hi, ev.sigma)

    # bisection
    while hi - lo > tol * min(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if run(mid).side == "hi":
            hi = mid
        else:
            lo = mid
    res.sigma_lo, res.sigma_hi = lo, hi

    if evaluate_midpoint:
        mid = 0.5 * (lo + hi)
        res.midpoint_sigma = mid
        mcfg = replace(cfg, checkpoint_dt=min(cfg.checkpoint_dt, 0.1))
        traj = simulate(template.with_sigma(mid), nl, alpha, mcfg)
        if sc.is_compact:
            profile = profile_V(nl, alpha, 400)
            t_settle = _settle_time(traj, profile, sc, ccfg)
            res.midpoint_settle_time = t_settle
            res.midpoint_outcome = detect_outcome(traj.truncated(t_settle), sc, nl=nl, cfg=ccfg, profile=profile)
        else:
            res.midpoint_outcome = detect_outcome(traj, sc, nl=nl, cfg=ccfg)
        if res.midpoint_outcome.verdict not in (TRANSITION, UNDETERMINED):
            res.notes.append(f"midpoint run classified as {res.midpoint_outcome.verdict}")
    return res
