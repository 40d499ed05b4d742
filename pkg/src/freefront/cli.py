"""Command-line front end.

Every subcommand reads one JSON or TOML config, writes its outputs into the
output directory (``--out``, else ``$FREEFRONT_OUT``, else ``./freefront_out``)
and prints a one-line summary. Exit codes: 0 success, 1 invalid input,
2 numerical failure, 3 inconclusive result.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from .certificates import vanishing_certificate
from .classifier import (
    SPREADING,
    UNDETERMINED,
    ClassifierConfig,
    HarnessError,
    compare_runs,
    detect_outcome,
    spreading_speed,
)
from .nonlinearity import DomainError, Nonlinearity, nonlinearity_from_config
from .phase_plane import PreconditionError, classify_stationary, profile_V
from .semiwave import ShootingError, solve_cstar
from .solver import (
    FAILURE,
    Checkpoint,
    InitialData,
    InitialDataError,
    NumericalFailure,
    RunConfig,
    Trajectory,
    make_state,
    simulate,
)
from .threshold import find_sigma_star, projected_runs

logger = logging.getLogger("freefront")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
OUT_ENV = "FREEFRONT_OUT"
DEFAULT_OUT = "freefront_out"

DEFAULTS: dict[str, Any] = {
    "alpha": 0.4,
    "nonlinearity": {"kind": "logistic", "r": 1.0},
    "initial": {"shape": "cosine", "h0": 1.0, "sigma": 1.0, "n": 400},
    "solver": RunConfig().to_dict(),
    "classifier": ClassifierConfig().__dict__,
    "threshold": {"tol": 1e-3, "sigma_cap": 1e6, "max_doublings": 3},
    "stationary": {"n": 1000},
    "semiwave": {"width": 1e-10, "rtol": 1e-10},
    "sweep": {"sigma": [1.0], "alpha": None},
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# -- configuration ---------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | Path | None) -> dict[str, Any]:
    """Read JSON or TOML and fill in every default, so outputs can embed the resolved config."""
    user: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        raw = path.read_bytes()
        if path.suffix.lower() == ".json":
            user = json.loads(raw)
        else:
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            user = tomllib.loads(raw.decode())
        user.setdefault("_base_dir", str(path.parent.resolve()))
    unknown = set(user) - set(DEFAULTS) - {"_base_dir", "output"}
    if unknown:
        raise UsageError(f"unknown config sections: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, user)
    if "alpha" in user:
        cfg["alpha"] = float(user["alpha"])
    return cfg


def build_nonlinearity(cfg: dict[str, Any]) -> Nonlinearity:
    return nonlinearity_from_config(cfg["nonlinearity"], cfg.get("_base_dir"))


def build_initial(cfg: dict[str, Any]) -> InitialData:
    ini = cfg["initial"]
    shape = ini.get("shape", "cosine")
    h0 = float(ini.get("h0", 1.0))
    sigma = float(ini.get("sigma", 1.0))
    n = int(ini.get("n", 400))
    if shape == "cosine":
        return InitialData.cosine(h0, sigma, n)
    if shape == "parabola":
        return InitialData.from_function(
            lambda x: 1.0 - (x / h0) ** 2, h0, sigma, n, dfun=lambda x: -2.0 * x / h0**2, label="parabola"
        )
    if shape == "csv":
        path = Path(ini["path"])
        if not path.is_absolute() and cfg.get("_base_dir"):
            path = Path(cfg["_base_dir"]) / path
        arr = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        x, phi = arr[:, 0], arr[:, 1]
        if not np.allclose(x, np.linspace(-h0, h0, x.size), rtol=0, atol=1e-9 * h0):
            raise UsageError("csv initial data must be sampled uniformly on [-h0, h0]")
        return InitialData(h0, phi, sigma=sigma, label=path.name)
    raise UsageError(f"unknown initial shape {shape!r}")


def _public(cfg: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


# -- deterministic output ----------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict[str, Any], cfg: dict[str, Any]) -> None:
    body = dict(payload, config=_public(cfg))
    path.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: list[str], rows, cfg: dict[str, Any]) -> None:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_jsonable(_public(cfg)), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    path.write_text(buf.getvalue())


def trajectory_to_dict(traj: Trajectory) -> dict[str, Any]:
    f = traj.final
    return {
        "t": traj.t,
        "g": traj.g,
        "h": traj.h,
        "gprime": traj.gprime,
        "hprime": traj.hprime,
        "max_u": traj.max_u,
        "checkpoints": [{"t": c.t, "g": c.g, "h": c.h, "u": c.u} for c in traj.checkpoints],
        "termination": traj.termination,
        "T_star": traj.T_star,
        "final": {"t": f.t, "g": f.g, "h": f.h, "u": f.u},
        "events": traj.events,
        "monitors": traj.monitors,
        "meta": traj.meta,
    }


def trajectory_from_dict(d: dict[str, Any]) -> Trajectory:
    arr = lambda k: np.asarray(d[k], dtype=float)
    meta = d["meta"]
    f = d["final"]
    final = make_state(f["t"], f["g"], f["h"], np.asarray(f["u"], dtype=float), float(meta["alpha"]))
    cps = [Checkpoint(c["t"], c["g"], c["h"], np.asarray(c["u"], dtype=float)) for c in d["checkpoints"]]
    return Trajectory(
        arr("t"), arr("g"), arr("h"), arr("gprime"), arr("hprime"), arr("max_u"),
        cps, d["termination"], final, d.get("T_star"), d.get("events", {}), d.get("monitors", {}), meta,
    )


def _outdir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -------------------------------------------------------------------


def _run_one(cfg: dict[str, Any]) -> tuple[Trajectory, Any]:
    nl = build_nonlinearity(cfg)
    alpha = cfg["alpha"]
    traj = simulate(build_initial(cfg), nl, alpha, RunConfig.from_dict(cfg["solver"]))
    sc = classify_stationary(nl, alpha)
    out = detect_outcome(traj, sc, nl=nl, cfg=ClassifierConfig.from_dict(cfg["classifier"]))
    return traj, out


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    nl, data = build_nonlinearity(cfg), build_initial(cfg)
    cert = vanishing_certificate(data, nl, cfg["alpha"])
    if cert is not None:
        print(f"certificate: vanishing guaranteed ({cert.name}, margin {cert.margin:.3g})")
    traj, outcome = _run_one(cfg)
    stem = args.name
    write_json(out / f"{stem}.json", {"trajectory": trajectory_to_dict(traj), "outcome": outcome.to_dict()}, cfg)
    rows = zip(traj.t, traj.g, traj.h, traj.gprime, traj.hprime, traj.max_u)
    write_csv(out / f"{stem}.csv", ["t", "g", "h", "gprime", "hprime", "max_u"], rows, cfg)
    write_csv(out / f"{stem}_final.csv", ["x", "u"], zip(traj.final.x, traj.final.u), cfg)
    print(
        f"{traj.termination}: t={traj.t[-1]:.6g} width={traj.final.width:.6g} "
        f"verdict={outcome.verdict} violations={sum(traj.monitors['violations'].values())}"
    )
    return EXIT_NUMERICAL if traj.termination == FAILURE else EXIT_OK


def cmd_classify(args) -> int:
    payload = json.loads(Path(args.trajectory).read_text())
    cfg = load_config(None)
    cfg = _merge(cfg, {k: v for k, v in payload.get("config", {}).items() if k in DEFAULTS})
    if args.config:
        cfg = _merge(cfg, _public(load_config(args.config)))
    traj = trajectory_from_dict(payload["trajectory"] if "trajectory" in payload else payload)
    nl = build_nonlinearity(cfg)
    sc = classify_stationary(nl, traj.alpha)
    outcome = detect_outcome(traj, sc, nl=nl, cfg=ClassifierConfig.from_dict(cfg["classifier"]))
    result = {"outcome": outcome.to_dict()}
    if outcome.verdict == SPREADING and args.speed:
        cs = solve_cstar(nl, traj.alpha)
        rep = spreading_speed(traj, cs.c_star)
        result["speed"] = rep.__dict__ | {"c_star": cs.c_star}
    out = _outdir(args)
    write_json(out / f"{Path(args.trajectory).stem}_verdict.json", result, cfg)
    print(f"verdict={outcome.verdict}" + (f" ({outcome.reason})" if outcome.reason else ""))
    return EXIT_INCONCLUSIVE if outcome.verdict == UNDETERMINED else EXIT_OK


def cmd_compare(args) -> int:
    lo_cfg, hi_cfg = load_config(args.lo), load_config(args.hi)
    for key in ("alpha", "nonlinearity"):
        if _public(lo_cfg)[key] != _public(hi_cfg)[key]:
            raise UsageError(f"compared runs must share {key}")
    lo, _ = _run_one(lo_cfg)
    hi, _ = _run_one(hi_cfg)
    rep = compare_runs(lo, hi)
    out = _outdir(args)
    write_json(out / "compare.json", {"ordering": rep.__dict__, "hi_config": _public(hi_cfg)}, lo_cfg)
    print(f"ordering {'holds' if rep.ok else 'VIOLATED'} at {rep.checked} checkpoints")
    return EXIT_OK if rep.ok else EXIT_NUMERICAL


def cmd_stationary(args) -> int:
    cfg = load_config(args.config)
    nl = build_nonlinearity(cfg)
    sc = classify_stationary(nl, cfg["alpha"])
    out = _outdir(args)
    write_json(out / "stationary.json", {"stationary": sc.to_dict()}, cfg)
    if sc.is_compact:
        prof = profile_V(nl, cfg["alpha"], int(cfg["stationary"]["n"]))
        write_csv(out / "stationary.csv", ["x", "v"], zip(prof.x, prof.v), cfg)
        print(f"compact: B={sc.B:.12g} ell={sc.ell:.12g}")
    else:
        print(f"{sc.case}: alpha0={sc.alpha0:.12g}")
    return EXIT_OK


def cmd_semiwave(args) -> int:
    cfg = load_config(args.config)
    nl = build_nonlinearity(cfg)
    res = solve_cstar(nl, cfg["alpha"], **cfg["semiwave"])
    out = _outdir(args)
    write_json(
        out / "semiwave.json",
        {"c_star": res.c_star, "residual": res.residual_at_one, "bracket_width": res.bracket_width},
        cfg,
    )
    write_csv(out / "semiwave.csv", ["z", "q"], zip(res.z, res.q), cfg)
    print(f"c*={res.c_star:.12g} bracket_width={res.bracket_width:.3g}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    cfg = load_config(args.config)
    thr = cfg["threshold"]
    nl, data = build_nonlinearity(cfg), build_initial(cfg)
    print(f"projected cost: about {projected_runs(thr['tol'])} simulations plus horizon retries", flush=True)
    res = find_sigma_star(
        data,
        nl,
        cfg["alpha"],
        tol=thr["tol"],
        cfg=RunConfig.from_dict(cfg["solver"]),
        ccfg=ClassifierConfig.from_dict(cfg["classifier"]),
        sigma_cap=thr["sigma_cap"],
        max_doublings=thr["max_doublings"],
        jobs=args.jobs,
    )
    out = _outdir(args)
    write_json(out / "threshold.json", res.to_dict(), cfg)
    rows = [(e.sigma, e.verdict, e.time, e.horizon, e.termination) for e in res.evaluations]
    write_csv(out / "threshold_log.csv", ["sigma", "verdict", "time", "horizon", "termination"], rows, cfg)
    if res.infinite:
        print(f"sigma* = inf (no spreading up to {thr['sigma_cap']:g})")
    else:
        print(f"sigma* in [{res.sigma_lo:.9g}, {res.sigma_hi:.9g}] after {len(res.evaluations)} runs")
    return EXIT_INCONCLUSIVE if res.inconclusive else EXIT_OK


def cmd_certify(args) -> int:
    cfg = load_config(args.config)
    reason = vanishing_certificate(build_initial(cfg), build_nonlinearity(cfg), cfg["alpha"])
    out = _outdir(args)
    payload = {"certified": reason is not None, "reason": None if reason is None else reason.to_dict()}
    write_json(out / "certificate.json", payload, cfg)
    print("vanishing certified: " + (f"{reason.name} (margin {reason.margin:.3g})" if reason else "no"))
    return EXIT_OK


def _sweep_point(cfg: dict[str, Any]) -> dict[str, Any]:
    try:
        traj, outcome = _run_one(cfg)
    except (ValueError, NumericalFailure) as exc:
        return {"verdict": "error", "T_star": None, "width": None, "error": str(exc)}
    return {
        "verdict": outcome.verdict,
        "T_star": traj.T_star,
        "width": traj.final.width,
        "termination": traj.termination,
        "violations": sum(traj.monitors["violations"].values()),
    }


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    sigmas = [float(s) for s in cfg["sweep"]["sigma"]]
    alphas = cfg["sweep"]["alpha"] or [cfg["alpha"]]
    points = sorted({(s, float(a)) for s in sigmas for a in alphas}, key=lambda p: (p[1], p[0]))
    cfgs = [_merge(cfg, {"alpha": a, "initial": {"sigma": s}}) for s, a in points]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, cfgs))
    else:
        results = [_sweep_point(c) for c in cfgs]
    out = _outdir(args)
    pdir = out / "points"
    pdir.mkdir(exist_ok=True)
    rows = []
    for (s, a), r, c in zip(points, results, cfgs):
        write_json(pdir / f"alpha{a:.6g}_sigma{s:.9g}.json", r, c)
        rows.append((s, a, r["verdict"], "" if r["T_star"] is None else float(r["T_star"]),
                     "" if r["width"] is None else float(r["width"])))
    write_csv(out / "sweep.csv", ["sigma", "alpha", "verdict", "T_star", "width"], rows, cfg)
    counts = {v: sum(r["verdict"] == v for r in results) for v in sorted({r["verdict"] for r in results})}
    print(f"{len(points)} points: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_NUMERICAL if any(r["verdict"] == "error" for r in results) else EXIT_OK


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="freefront", description=__doc__.splitlines()[0])
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one simulation")
    s.add_argument("--config")
    s.add_argument("--name", default="trajectory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("classify", help="classify a saved trajectory")
    s.add_argument("trajectory")
    s.add_argument("--config", help="override classifier settings")
    s.add_argument("--speed", action="store_true", help="also fit the front speed against c*")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("compare", help="check ordering of two runs")
    s.add_argument("--lo", required=True)
    s.add_argument("--hi", required=True)
    s.set_defaults(func=cmd_compare)

    for name, func, hlp in (
        ("stationary", cmd_stationary, "stationary classification and profile"),
        ("semiwave", cmd_semiwave, "semi-wave speed c* and profile"),
        ("certify", cmd_certify, "analytic vanishing certificate"),
    ):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config")
        s.set_defaults(func=func)

    for name, func, hlp in (("threshold", cmd_threshold, "bisect for sigma*"), ("sweep", cmd_sweep, "grid of runs")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config")
        s.add_argument("--jobs", type=int, default=1)
        s.set_defaults(func=func)
    return p


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NumericalFailure, ShootingError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, PreconditionError, InitialDataError, DomainError, HarnessError,
            FileNotFoundError, KeyError, TypeError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
