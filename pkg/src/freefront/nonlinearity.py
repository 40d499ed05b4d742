"""Reaction terms f(u), their antiderivatives F(u) and structural classification.

Four kinds are supported: ``logistic`` (r u (1 - u)), ``cubic_bistable``
(u (u - theta)(1 - u)), ``tabulated`` (cubic Hermite interpolation of
(u, f, f') triples) and ``zero``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from scipy import interpolate, optimize

KINDS = ("logistic", "cubic_bistable", "tabulated", "zero")
DEFAULT_CAP = 5.0
CLASSIFY_GRID = 2048

# Gauss-Legendre rule, exact for the polynomial kinds (degree <= 15).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class DomainError(ValueError):
    """Raised when f is evaluated outside [0, domain_cap]."""


@dataclass(frozen=True)
class NonlinearityClass:
    kind: str  # "monostable" | "bistable" | "other"
    theta: float | None = None

    def __str__(self) -> str:
        if self.kind == "bistable":
            return f"bistable(theta={self.theta:.12g})"
        return self.kind


@dataclass(frozen=True)
class Nonlinearity:
    """Immutable description of the reaction term.

    Use the ``logistic``, ``cubic_bistable``, ``tabulated`` and ``zero``
    constructors rather than the raw initializer.
    """

    kind: str
    r: float = 1.0
    theta: float = 0.5
    nodes: tuple[tuple[float, float, float], ...] = field(default=(), repr=False)
    domain_cap: float = DEFAULT_CAP

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if not (self.domain_cap > 0 and np.isfinite(self.domain_cap)):
            raise ValueError("domain_cap must be positive and finite")
        if self.kind == "cubic_bistable" and not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.kind == "tabulated":
            u = np.array([p[0] for p in self.nodes])
            if u.size < 2 or np.any(np.diff(u) <= 0):
                raise ValueError("tabulated nodes must be strictly increasing (at least two)")
            if u[0] != 0.0 or self.nodes[0][1] != 0.0:
                raise ValueError("tabulated f must start at the node (0, 0): f(0) = 0 is required")
            if self.domain_cap > u[-1]:
                raise ValueError("domain_cap exceeds the last tabulated node")
            if not np.all(np.isfinite(np.asarray(self.nodes))):
                raise ValueError("tabulated nodes must be finite")

    # -- constructors -------------------------------------------------------

    @classmethod
    def logistic(cls, r: float = 1.0, domain_cap: float = DEFAULT_CAP) -> Nonlinearity:
        return cls("logistic", r=float(r), domain_cap=float(domain_cap))

    @classmethod
    def cubic_bistable(cls, theta: float, domain_cap: float = DEFAULT_CAP) -> Nonlinearity:
        return cls("cubic_bistable", theta=float(theta), domain_cap=float(domain_cap))

    @classmethod
    def zero(cls, domain_cap: float = DEFAULT_CAP) -> Nonlinearity:
        return cls("zero", domain_cap=float(domain_cap))

    @classmethod
    def tabulated(cls, u, f, df, domain_cap: float | None = None) -> Nonlinearity:
        u, f, df = (np.asarray(a, dtype=float).ravel() for a in (u, f, df))
        if not (u.shape == f.shape == df.shape):
            raise ValueError("u, f and f' columns must have equal length")
        nodes = tuple((float(a), float(b), float(c)) for a, b, c in zip(u, f, df))
        cap = float(u[-1]) if domain_cap is None else float(domain_cap)
        return cls("tabulated", nodes=nodes, domain_cap=cap)

    @classmethod
    def from_function(cls, fun, dfun, u_nodes, domain_cap: float | None = None) -> Nonlinearity:
        """Tabulate callables ``fun``/``dfun`` on ``u_nodes``."""
        u = np.asarray(u_nodes, dtype=float)
        return cls.tabulated(u, [fun(x) for x in u], [dfun(x) for x in u], domain_cap)

    @property
    def is_closed_form(self) -> bool:
        return self.kind != "tabulated"

    def with_cap(self, cap: float) -> Nonlinearity:
        """Copy with a different trust cap.

        Closed-form kinds are exact everywhere, so the cap may grow freely.
        A tabulated f cannot be trusted past its last node.
        """
        return replace(self, domain_cap=float(cap))

    # -- evaluation ---------------------------------------------------------

    @cached_property
    def _spline(self) -> interpolate.CubicHermiteSpline:
        arr = np.asarray(self.nodes)
        return interpolate.CubicHermiteSpline(arr[:, 0], arr[:, 1], arr[:, 2], extrapolate=True)

    @cached_property
    def _spline_d(self) -> interpolate.PPoly:
        return self._spline.derivative()

    @cached_property
    def _spline_anti(self) -> interpolate.PPoly:
        return self._spline.antiderivative()

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.size:
            lo = float(np.min(u))
            hi = float(np.max(u))
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise DomainError("non-finite argument")
            if lo < -1e-9 or hi > self.domain_cap * (1.0 + 1e-12):
                raise DomainError(
                    f"u range [{lo:.6g}, {hi:.6g}] outside [0, {self.domain_cap:.6g}]"
                )
        return u

    def f(self, u):
        u = self._check(u)
        if self.kind == "logistic":
            return self.r * u * (1.0 - u)
        if self.kind == "cubic_bistable":
            return u * (u - self.theta) * (1.0 - u)
        if self.kind == "zero":
            return np.zeros_like(u)
        return self._spline(u)

    def df(self, u):
        u = self._check(u)
        if self.kind == "logistic":
            return self.r * (1.0 - 2.0 * u)
        if self.kind == "cubic_bistable":
            th = self.theta
            return -3.0 * u * u + 2.0 * (1.0 + th) * u - th
        if self.kind == "zero":
            return np.zeros_like(u)
        return self._spline_d(u)

    def F(self, u):
        u = self._check(u)
        if self.kind == "logistic":
            return self.r * (u * u / 2.0 - u ** 3 / 3.0)
        if self.kind == "cubic_bistable":
            th = self.theta
            return -(u ** 4) / 4.0 + (1.0 + th) * u ** 3 / 3.0 - th * u * u / 2.0
        if self.kind == "zero":
            return np.zeros_like(u)
        return self._spline_anti(u) - self._spline_anti(0.0)

    def mean_f(self, a, b):
        """Average of f over [a, b], computed without cancellation for short intervals.

        Equals (F(b) - F(a)) / (b - a). Exact for the polynomial kinds; for a
        tabulated f it switches to the antiderivative once b - a > 1e-3.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a, b = np.broadcast_arrays(a, b)
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        pts = mid[..., None] + half[..., None] * _GL_X
        self._check(pts)
        vals = self.f(pts)
        out = 0.5 * np.sum(vals * _GL_W, axis=-1)
        if self.kind == "tabulated":
            wide = np.abs(b - a) > 1e-3
            if np.any(wide):
                out = np.where(
                    wide,
                    (self.F(np.where(wide, b, 1.0)) - self.F(np.where(wide, a, 0.0)))
                    / np.where(wide, b - a, 1.0),
                    out,
                )
        return out

    # -- structure ------------------------------------------------------------

    def zeros(self, lo: float = 0.0, hi: float | None = None) -> list[float]:
        """Zeros of f in (lo, hi], sorted. Exact for polynomial kinds."""
        hi = self.domain_cap if hi is None else hi
        if self.kind == "zero":
            return []
        if self.kind == "logistic":
            cand = [1.0] if self.r != 0 else []
        elif self.kind == "cubic_bistable":
            cand = [self.theta, 1.0]
        else:
            cand = _scan_zeros(self.f, lo, hi, max(CLASSIFY_GRID * 4, 40 * len(self.nodes)))
        return [z for z in cand if lo < z <= hi]

    def positive_stable_zero(self) -> float | None:
        """Smallest positive zero of f at which f is decreasing (the spreading plateau)."""
        for z in self.zeros():
            if self.df(z) < 0:
                return float(z)
        return None

    def to_config(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "domain_cap": self.domain_cap}
        if self.kind == "logistic":
            out["r"] = self.r
        elif self.kind == "cubic_bistable":
            out["theta"] = self.theta
        elif self.kind == "tabulated":
            out["nodes"] = [list(p) for p in self.nodes]
        return out


def _scan_zeros(fun, lo: float, hi: float, npts: int) -> list[float]:
    grid = np.linspace(lo, hi, npts + 1)[1:]
    vals = fun(grid)
    zeros = [float(u) for u, v in zip(grid, vals) if v == 0.0]
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in sign_change:
        zeros.append(optimize.brentq(lambda s: float(fun(s)), grid[i], grid[i + 1], xtol=1e-15, rtol=4e-16))
    return sorted(zeros)


def nonlinearity_from_config(cfg: dict[str, Any], base_dir: str | Path | None = None) -> Nonlinearity:
    """Build from a run-config block such as ``{"kind": "logistic", "r": 1.0}``.

    A tabulated kind takes either inline ``nodes`` or a ``csv`` path holding
    (u, f, f') rows.
    """
    kind = str(cfg.get("kind", "")).lower()
    cap = cfg.get("domain_cap")
    if kind == "logistic":
        return Nonlinearity.logistic(cfg.get("r", 1.0), cap or DEFAULT_CAP)
    if kind in ("cubic_bistable", "bistable", "cubic"):
        return Nonlinearity.cubic_bistable(cfg["theta"], cap or DEFAULT_CAP)
    if kind == "zero":
        return Nonlinearity.zero(cap or DEFAULT_CAP)
    if kind == "tabulated":
        if "nodes" in cfg:
            arr = np.asarray(cfg["nodes"], dtype=float)
        else:
            path = Path(cfg["csv"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            arr = load_tabulated_csv(path)
        return Nonlinearity.tabulated(arr[:, 0], arr[:, 1], arr[:, 2], cap)
    raise ValueError(f"unknown nonlinearity kind {kind!r}")


def load_tabulated_csv(path: str | Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row[:3]])
            except ValueError:
                continue  # header line
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{path}: expected rows of (u, f, f')")
    return arr


# -- module-level operations -------------------------------------------------


def eval_f(nl: Nonlinearity, u: float) -> float:
    return float(nl.f(u))


def eval_F(nl: Nonlinearity, u: float) -> float:
    return float(nl.F(u))


def lipschitz_bound(nl: Nonlinearity, cap: float) -> float:
    """max |f'(u)| over [0, cap]."""
    if not 0 < cap <= nl.domain_cap * (1.0 + 1e-12):
        raise DomainError(f"cap {cap} outside (0, {nl.domain_cap}]")
    if nl.kind == "zero":
        return 0.0
    if nl.kind == "logistic":
        return float(max(abs(nl.r), abs(nl.r * (1.0 - 2.0 * cap))))
    if nl.kind == "cubic_bistable":
        cand = [0.0, cap]
        vertex = (1.0 + nl.theta) / 3.0
        if vertex < cap:
            cand.append(vertex)
        return float(np.max(np.abs(nl.df(np.array(cand)))))
    # Tabulated: dense sampling, then polish around the best sample.
    npts = max(10_000, 20 * len(nl.nodes))
    grid = np.linspace(0.0, cap, npts + 1)
    vals = np.abs(nl.df(grid))
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, npts)]
    res = optimize.minimize_scalar(
        lambda s: -abs(float(nl.df(s))), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
    )
    return max(best, -float(res.fun))


def linear_growth_constant(nl: Nonlinearity) -> float:
    """A constant K with f(u) <= K u on [0, domain_cap] (growth condition)."""
    grid = np.linspace(0.0, nl.domain_cap, 4 * CLASSIFY_GRID + 1)[1:]
    ratio = nl.f(grid) / grid
    return float(max(np.max(ratio), float(nl.df(0.0)), 0.0))


def classify_nonlinearity(nl: Nonlinearity) -> NonlinearityClass:
    """Monostable / bistable / other, checked on a dense grid (a semi-decision)."""
    if nl.kind == "zero" or nl.domain_cap <= 1.0:
        return NonlinearityClass("other")
    grid = np.linspace(0.0, nl.domain_cap, CLASSIFY_GRID + 1)[1:-1]
    grid = grid[np.abs(grid - 1.0) > 1e-12]
    vals = nl.f(grid)
    f1 = float(nl.f(1.0))
    d0, d1 = float(nl.df(0.0)), float(nl.df(1.0))
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    if abs(f1) > 1e-12 * scale or d1 >= 0:
        return NonlinearityClass("other")

    if d0 > 0 and np.all((1.0 - grid) * vals > 0):
        return NonlinearityClass("monostable")

    if d0 < 0:
        inner = grid < 1.0
        zs = [z for z in nl.zeros(0.0, 1.0) if 0.0 < z < 1.0 - 1e-12]
        if len(zs) != 1:
            return NonlinearityClass("other")
        theta = zs[0]
        gi = grid[inner]
        vi = vals[inner]
        below, above = gi < theta, gi > theta
        ok = (
            np.all(vi[below] < 0)
            and np.all(vi[above] > 0)
            and np.all(vals[grid > 1.0] < 0)
            and float(nl.F(1.0)) > 0
        )
        if ok:
            return NonlinearityClass("bistable", float(theta))
    return NonlinearityClass("other")
