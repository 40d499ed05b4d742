"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Trajectories produced here are pooled and audited against the a priori
bounds in criterion 7, together with a few extra regimes.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

import oracles
from acceptance_report import report
from freefront.certificates import vanishing_certificate
from freefront.classifier import VANISHING, compare_runs, detect_outcome, spreading_speed
from freefront.nonlinearity import Nonlinearity
from freefront.phase_plane import alpha0, classify_stationary, critical_resistance, half_width_ell, profile_V
from freefront.semiwave import solve_cstar
from freefront.solver import SHRINK_VANISH, InitialData, RunConfig, make_state, simulate
from freefront.threshold import threshold_run_config

LOGISTIC = Nonlinearity.logistic()
BISTABLE = Nonlinearity.cubic_bistable(0.25)
CORPUS: list = []  # every trajectory simulated in this module


def run(data, nl, alpha, cfg=None, **kw):
    tr = simulate(data, nl, alpha, cfg, **kw)
    CORPUS.append(tr)
    return tr


# -- 1 ---------------------------------------------------------------------------------


def test_c01_stationary_fidelity():
    a = 0.4
    t0 = time.perf_counter()
    p = profile_V(LOGISTIC, a, 1000)
    elapsed = time.perf_counter() - t0
    dx = p.x[1] - p.x[0]
    v = p.v
    resid = float(np.max(np.abs(oracles.d2_fourth_order(v, dx) + LOGISTIC.f(v[2:-2]))))
    dv = oracles.d1_fourth_order(v, dx)
    first = float(np.max(np.abs(dv**2 + 2 * LOGISTIC.F(v) - a * a)))
    sym = float(np.max(np.abs(v - v[::-1])))
    slope = abs(float(dv[0]) - a)
    ok = resid <= 1e-6 and first <= 1e-6 and sym <= 1e-10 and slope <= 1e-6 and elapsed < 1.0
    detail = f"residual={resid:.2e} first_integral={first:.2e} symmetry={sym:.1e} slope_err={slope:.2e} time={elapsed:.3f}s"
    assert report(1, "stationary fidelity", ok, detail)


# -- 2 ---------------------------------------------------------------------------------


def test_c02_quadrature_vs_shooting():
    a0 = alpha0(LOGISTIC)
    alphas = np.linspace(0.1, 0.95 * a0, 7)[1:-1]  # five values strictly inside (0.1, 0.95 alpha0)
    errs = []
    for a in alphas:
        ref = oracles.half_width_by_shooting(oracles.logistic_f, a)
        errs.append(abs(half_width_ell(LOGISTIC, a) - ref) / ref)
    worst = max(errs)
    detail = "alphas=" + ",".join(f"{a:.3f}" for a in alphas) + f" max_rel_err={worst:.2e}"
    assert report(2, "ell quadrature vs shooting", worst <= 1e-6, detail)


# -- 3 ---------------------------------------------------------------------------------


def test_c03_stationarity_under_evolution():
    a = 0.4
    t0 = time.perf_counter()
    p = profile_V(LOGISTIC, a, 2000)
    state = make_state(0.0, -p.ell, p.ell, p.v.copy(), a)
    tr = run(InitialData(p.ell, p.v.copy()), LOGISTIC, a, RunConfig(n=2000, t_horizon=5.0), state=state)
    elapsed = time.perf_counter() - t0
    drift = max(float(np.max(np.abs(c.u - p(c.x + p.ell)))) for c in tr.checkpoints)
    speed = float(max(np.max(np.abs(tr.gprime)), np.max(np.abs(tr.hprime))))
    ok = drift <= 1e-3 and speed <= 1e-4 and elapsed < 30 and tr.t[-1] == pytest.approx(5.0)
    detail = f"sup_drift={drift:.2e} max|g'|,|h'|={speed:.2e} time={elapsed:.2f}s"
    assert report(3, "stationarity under evolution", ok, detail)


# -- 4 ---------------------------------------------------------------------------------


def test_c04_shrink_vanish_equivalence():
    a = 0.4
    base = RunConfig()
    cfg = threshold_run_config(base, classify_stationary(LOGISTIC, a), 1.0)
    sigmas = np.linspace(0.25, 5.0, 20)
    n_sv, bad = 0, []
    for s in sigmas:
        tr = run(InitialData.cosine(1.0, s), LOGISTIC, a, cfg)
        if tr.termination == SHRINK_VANISH:
            n_sv += 1
            f = tr.final
            if not (f.width <= 2 * cfg.eps_shrink and f.max_u <= 2 * cfg.eps_vanish):
                bad.append((float(s), f.width, f.max_u))
    ok = not bad and n_sv > 0
    assert report(4, "shrink/vanish co-occurrence", ok, f"{n_sv} shrink-vanish runs of 20, exceptions={bad}")


# -- 5 ---------------------------------------------------------------------------------


def test_c05_threshold(logistic_threshold):
    res, elapsed = logistic_threshold
    mid = res.midpoint_outcome
    width_err = abs(mid.width - res.two_ell) / res.two_ell
    ok = res.width <= 1e-3 and res.log_is_monotone() and width_err <= 0.05 and elapsed < 600
    detail = (
        f"sigma*∈[{res.sigma_lo:.7f},{res.sigma_hi:.7f}] width={res.width:.2e} runs={len(res.evaluations)} "
        f"midpoint={mid.verdict} width_err={width_err:.2e} time={elapsed:.1f}s"
    )
    assert report(5, "sharp threshold", ok, detail)


# -- 6 ---------------------------------------------------------------------------------


def test_c06_spreading_speed():
    a = 0.2
    t0 = time.perf_counter()
    cs = solve_cstar(LOGISTIC, a)
    fine = solve_cstar(LOGISTIC, a, width=1e-12, rtol=1e-12)
    tr = run(InitialData.cosine(1.0, 5.0), LOGISTIC, a, RunConfig(t_horizon=200.0, x_max=400.0))
    rep = spreading_speed(tr, cs.c_star)
    elapsed = time.perf_counter() - t0
    stable = abs(fine.c_star - cs.c_star)
    ok = (
        rep.rel_error <= 0.02
        and rep.left_rel_error <= 0.02
        and cs.bracket_width <= 1e-10
        and stable <= 1e-8
        and elapsed < 300
    )
    detail = (
        f"c*={cs.c_star:.8f} slope={rep.slope:.6f} rel={rep.rel_error:.2e} left_rel={rep.left_rel_error:.2e} "
        f"bracket={cs.bracket_width:.1e} refine_shift={stable:.1e} time={elapsed:.1f}s"
    )
    assert report(6, "spreading speed", ok, detail)


# -- 8 ---------------------------------------------------------------------------------


PAIRS = [
    (LOGISTIC, 0.4, (1.0, 0.5), (1.0, 1.0)),
    (LOGISTIC, 0.4, (1.0, 1.0), (1.0, 2.0)),
    (LOGISTIC, 0.4, (1.0, 2.0), (1.0, 3.5)),
    (LOGISTIC, 0.4, (1.0, 3.5), (1.0, 3.8)),
    (LOGISTIC, 0.4, (1.0, 1.0), (1.0, 1.0 + 2.0**-20)),
    (LOGISTIC, 0.4, (1.0, 0.1), (1.0, 6.0)),
    (LOGISTIC, 0.4, (0.5, 2.0), (1.0, 2.0)),
    (LOGISTIC, 0.4, (0.8, 3.0), (1.0, 3.0)),
    (LOGISTIC, 0.2, (1.0, 2.0), (1.5, 2.0)),
    (BISTABLE, 0.1, (2.0, 0.5), (2.0, 1.0)),
]


def test_c08_comparison_principle():
    cfg = RunConfig(t_horizon=20.0, checkpoint_dt=0.5)
    failures, checked = [], 0
    for nl, a, (h_lo, s_lo), (h_hi, s_hi) in PAIRS:
        lo = run(InitialData.cosine(h_lo, s_lo), nl, a, cfg)
        hi = run(InitialData.cosine(h_hi, s_hi), nl, a, cfg)
        rep = compare_runs(lo, hi)
        checked += rep.checked
        if not rep.ok:
            failures.append(((h_lo, s_lo), (h_hi, s_hi), rep.violations[:1]))
    ok = not failures
    assert report(8, "comparison principle", ok, f"{len(PAIRS)} pairs, {checked} checkpoints, failures={failures}")


# -- 9 ---------------------------------------------------------------------------------


def _exp_decay():
    return Nonlinearity.from_function(
        lambda u: u * math.exp(-u), lambda u: (1 - u) * math.exp(-u), np.linspace(0, 20, 801)
    )


def certificate_corpus():
    a0 = alpha0(LOGISTIC)
    ed = _exp_decay()
    ed_a0 = critical_resistance(ed).alpha0
    c = []
    c += [(LOGISTIC, a, 1.0, s) for a in (0.6, 0.7, 1.0) for s in (1.0, 3.0)]  # alpha above critical
    c += [(ed, ed_a0, 1.0, s) for s in (0.5, 1.0, 2.0, 4.0)]  # critical, supremum not attained
    c += [(LOGISTIC, a0, 1.0, s) for s in (0.5, 0.9)]  # critical, plateau comparison
    c += [(LOGISTIC, 0.4, 1.0, s) for s in (0.1, 0.3, 0.45)]  # below V_alpha
    c += [(LOGISTIC, 0.3, 1.5, 0.3), (BISTABLE, 0.1, 2.0, 0.3)]
    c += [(BISTABLE, 0.1, h0, s) for h0 in (6.0, 8.0) for s in (0.1, 0.2, 0.25)]  # below theta
    c += [(BISTABLE, 0.1, h0, s) for h0, s in ((0.5, 0.6), (0.4, 0.8), (0.3, 1.0))]  # small L1 norm
    c += [(LOGISTIC, 0.4, 1.0, 10.0), (LOGISTIC, 0.2, 1.0, 5.0), (BISTABLE, 0.1, 6.0, 2.0), (LOGISTIC, a0, 1.0, 1.5)]
    return c


def test_c09_certificate_soundness():
    corpus = certificate_corpus()
    assert len(corpus) == 30
    fired, bad = {}, []
    for nl, a, h0, s in corpus:
        data = InitialData.cosine(h0, s)
        reason = vanishing_certificate(data, nl, a)
        if reason is None:
            continue
        fired[reason.name] = fired.get(reason.name, 0) + 1
        tr = run(data, nl, a, RunConfig(t_horizon=500.0))
        out = detect_outcome(tr, classify_stationary(nl, a), nl=nl)
        if out.verdict != VANISHING:
            bad.append((nl.kind, a, h0, s, reason.name, out.verdict))
    routes = {"alpha_above_critical", "critical_unattained", "below_stationary", "below_theta", "small_mass"}
    ok = not bad and routes <= set(fired)
    assert report(9, "certificate soundness", ok, f"fired={dict(sorted(fired.items()))} counterexamples={bad}")


# -- 10 --------------------------------------------------------------------------------


def test_c10_convergence_order():
    a, t_end, dt = 0.4, 0.5, 1e-4
    sols = {}
    for n in (200, 400, 800, 1600):
        cfg = RunConfig(n=n, fixed_dt=dt, t_horizon=t_end, dx_max=1.0)
        tr = run(InitialData.cosine(1.0, 1.0, n), LOGISTIC, a, cfg)
        assert tr.termination == "horizon" and tr.final.n == n
        sols[n] = tr.final

    def on200(s):
        k = s.n // 200
        return s.u[::k], s.g, s.h

    ref_u, ref_g, ref_h = on200(sols[1600])
    u8, g8, h8 = on200(sols[800])
    # Richardson: remove the n=1600 run's own O(dx^2) error using the n=800 run
    rich = (ref_u + (ref_u - u8) / 3.0, ref_g + (ref_g - g8) / 3.0, ref_h + (ref_h - h8) / 3.0)

    def err(n, ref):
        u, g, h = on200(sols[n])
        return max(float(np.max(np.abs(u - ref[0]))), abs(g - ref[1]), abs(h - ref[2]))

    raw = [err(n, (ref_u, ref_g, ref_h)) for n in (200, 400, 800)]
    ext = [err(n, rich) for n in (200, 400, 800)]
    r_ext = (ext[0] / ext[1], ext[1] / ext[2])
    r_raw = (raw[0] / raw[1], raw[1] / raw[2])
    ok = all(3.5 <= r <= 4.5 for r in r_ext) and 3.5 <= r_raw[0] <= 4.5
    detail = (
        f"ratios vs extrapolated n=1600 reference={r_ext[0]:.3f},{r_ext[1]:.3f} "
        f"(raw n=1600 reference {r_raw[0]:.3f},{r_raw[1]:.3f})"
    )
    assert report(10, "second-order convergence", ok, detail)


# -- 7 (runs last: audits every trajectory above) --------------------------------------


def test_c99_a_priori_bounds():
    extra = [
        (LOGISTIC, 0.5, 1.0, 1.0),
        (LOGISTIC, 0.7, 2.0, 4.0),
        (BISTABLE, 0.1, 1.0, 2.0),
        (BISTABLE, 0.25, 3.0, 0.8),
        (Nonlinearity.zero(), 0.5, 1.0, 1.0),
        (_exp_decay(), 0.5, 1.0, 3.0),
    ]
    for nl, a, h0, s in extra:
        run(InitialData.cosine(h0, s), nl, a, RunConfig(t_horizon=60.0))
    x = np.linspace(-1, 1, 401)
    lopsided = np.cos(np.pi * x / 2) * np.exp(1.5 * x)
    run(InitialData(1.0, lopsided, sigma=1.5), LOGISTIC, 0.4, RunConfig(t_horizon=60.0))

    monitor_total, speed_bad, center_bad, steps = 0, 0, 0, 0
    for tr in CORPUS:
        a, h0 = tr.alpha, tr.h0
        monitor_total += tr.monitors["violations"]["speed_lower"] + tr.monitors["violations"]["center"]
        speed_bad += int(np.sum(tr.hprime <= -a - 1e-6) + np.sum(tr.gprime >= a + 1e-6))
        n_fine = max(tr.meta["config"]["n"], tr.meta["n_final"])
        center_bad += int(np.sum(np.abs(tr.g + tr.h) >= 2 * h0 + 10 * (tr.h - tr.g) / n_fine))
        steps += tr.t.size
    ok = monitor_total == 0 and speed_bad == 0 and center_bad == 0
    detail = (
        f"{len(CORPUS)} trajectories, {steps} recorded steps, monitor violations={monitor_total}, "
        f"speed={speed_bad}, centre={center_bad}"
    )
    assert report(7, "a priori bounds", ok, detail)
