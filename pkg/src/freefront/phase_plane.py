"""Stationary solutions of v'' + f(v) = 0, v(0) = 0, v'(0) = alpha.

Everything here rests on the first integral (v')^2 = alpha^2 - 2F(v): the
critical resistance alpha0, the turning value B, the half-width ell and the
compactly supported profile V_alpha are all quadratures of it.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import fft, integrate, interpolate, optimize

from .nonlinearity import Nonlinearity

logger = logging.getLogger(__name__)

SCAN_STEP = 1e-3
SPLIT_FRACTION = 0.9  # quad on [0, 0.9 B], endpoint substitution on the rest
QUAD_EPSABS = 1e-9
ALPHA_RTOL = 1e-12


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class CriticalResistance:
    alpha0: float
    argmax: float | None
    cond3_holds: bool
    sup_at_cap: bool


@dataclass(frozen=True)
class StationaryClass:
    """Which stationary regime holds for a given resistance.

    ``case`` is ``"compact"`` (V_alpha on [0, 2 ell]), ``"plateau"`` (increasing
    to B on [0, inf)) or ``"unbounded"`` (blows up at ``ell_blowup``).
    """

    alpha: float
    alpha0: float
    case: str
    cond3_holds: bool
    B: float | None = None
    ell: float | None = None
    ell_blowup: float | None = None

    @property
    def is_compact(self) -> bool:
        return self.case == "compact"

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "alpha0": self.alpha0,
            "case": self.case,
            "cond3_holds": self.cond3_holds,
            "B": self.B,
            "ell": _ext(self.ell),
            "ell_blowup": _ext(self.ell_blowup),
        }


def _ext(x: float | None):
    if x is None:
        return None
    return "inf" if math.isinf(x) else x


@dataclass(frozen=True)
class StationaryProfile:
    """Samples of V_alpha on n + 1 uniform nodes of [0, 2 ell].

    Calling the profile evaluates V_alpha anywhere (zero outside the support).
    """

    ell: float
    B: float
    x: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    _X: C.Chebyshev = field(repr=False)
    _H: C.Chebyshev = field(repr=False)

    @property
    def support_width(self) -> float:
        return 2.0 * self.ell

    @property
    def peak(self) -> float:
        return self.B

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.minimum(x, 2.0 * self.ell - x)
        inside = y > 0
        out = np.zeros_like(y)
        if np.any(inside):
            theta = _invert(self._X, self._H, np.clip(y[inside], 0.0, self.ell))
            out[inside] = self.B * (1.0 - (1.0 - theta) ** 2)
        return out


# ---------------------------------------------------------------------------


def _equal_alpha(a: float, b: float) -> bool:
    return abs(a - b) <= ALPHA_RTOL * max(1.0, abs(b))


def critical_resistance(nl: Nonlinearity) -> CriticalResistance:
    """sup of F over (0, domain_cap] and the derived alpha0."""
    cap = nl.domain_cap
    cands = [z for z in nl.zeros() if z < cap] + [cap]
    vals = [float(nl.F(z)) for z in cands]
    i = int(np.argmax(vals))
    sup = vals[i]
    if sup <= 0.0:
        return CriticalResistance(0.0, None, False, False)
    at_cap = cands[i] == cap and float(nl.f(cap)) > 0.0
    return CriticalResistance(math.sqrt(2.0 * sup), float(cands[i]), True, at_cap)


def alpha0(nl: Nonlinearity) -> float:
    crit = critical_resistance(nl)
    if crit.sup_at_cap:
        logger.warning("sup F is reached at domain_cap=%g; alpha0 is a lower bound", nl.domain_cap)
    return crit.alpha0


def crossing_B(nl: Nonlinearity, alpha: float) -> float | None:
    """Smallest v > 0 with 2F(v) = alpha^2, or None when there is none below the cap."""
    if alpha <= 0:
        raise PreconditionError("alpha must be positive")
    a2 = alpha * alpha
    cap = nl.domain_cap
    npts = max(int(math.ceil(cap / SCAN_STEP)), 2)
    grid = np.linspace(0.0, cap, npts + 1)
    # local maxima of F are added so narrow bumps are never stepped over
    maxima = [z for z in nl.zeros() if float(nl.df(z)) <= 0.0 and z <= cap]
    grid = np.unique(np.concatenate([grid, maxima]))
    maxima_set = set(maxima)
    G = 2.0 * nl.F(grid) - a2
    tol = 1e-13 * max(a2, 1e-300)
    for i in range(1, grid.size):
        gi = G[i]
        if gi == 0.0 or (abs(gi) <= tol and float(grid[i]) in maxima_set):
            return float(grid[i])  # exact hit or tangential contact
        if gi > 0.0:
            return float(
                optimize.brentq(
                    lambda s: 2.0 * float(nl.F(s)) - a2, grid[i - 1], grid[i], xtol=1e-15, rtol=1e-13
                )
            )
    return None


def _gap(nl: Nonlinearity, r, B: float):
    """alpha^2 - 2F(r) written as 2 (B - r) * mean(f on [r, B]), free of cancellation."""
    r = np.asarray(r, dtype=float)
    return 2.0 * (B - r) * nl.mean_f(r, B)


def _tail_diverges(nl: Nonlinearity, B: float) -> bool:
    """Divergence test on tail integrals over [B - d, B - d/2] for five halvings of d."""
    fB = float(nl.f(B))
    d = 0.1 * B
    if fB > 0.0:
        dfB = abs(float(nl.df(B)))
        if dfB > 0.0:
            d = min(d, 0.5 * fB / dfB)
    integrand = lambda r: 1.0 / math.sqrt(max(float(_gap(nl, r, B)), 1e-300))

    def tail(dd: float) -> float:
        return integrate.quad(integrand, B - dd, B - dd / 2, epsabs=0.0, epsrel=1e-10, limit=200)[0]

    prev = tail(d)
    for _ in range(5):
        d /= 2.0
        cur = tail(d)
        if cur > 0 and prev / cur >= 1.2:
            return False
        prev = cur
    return True


def half_width_ell(nl: Nonlinearity, alpha: float, B: float | None = None) -> float:
    """ell = int_0^B dr / sqrt(alpha^2 - 2F(r)); math.inf when the tail diverges."""
    if B is None:
        B = crossing_B(nl, alpha)
    if B is None:
        raise PreconditionError("no crossing 2F(v) = alpha^2: half-width undefined")
    if _tail_diverges(nl, B):
        return math.inf
    split = SPLIT_FRACTION * B
    head = integrate.quad(
        lambda r: 1.0 / math.sqrt(float(_gap(nl, r, B))), 0.0, split, epsabs=QUAD_EPSABS * 1e-3, limit=200
    )[0]
    # r = B - s^2 turns (B - r)^(-1/2) into the bounded integrand sqrt(2 / mean f).
    smax = math.sqrt(B - split)
    tail = integrate.quad(
        lambda s: math.sqrt(2.0 / float(nl.mean_f(B - s * s, B))) if s > 0 else math.sqrt(2.0 / float(nl.f(B))),
        0.0,
        smax,
        epsabs=QUAD_EPSABS * 1e-3,
        limit=200,
    )[0]
    return head + tail


def _blowup_position(nl: Nonlinearity, alpha: float) -> float:
    """Position where the unbounded solution escapes to infinity."""
    if nl.kind == "zero":
        return math.inf
    a2 = alpha * alpha
    wide = nl.with_cap(1e300) if nl.is_closed_form else nl
    upper = math.inf if nl.is_closed_form else nl.domain_cap
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val = integrate.quad(
            lambda r: 1.0 / math.sqrt(max(a2 - 2.0 * float(wide.F(r)), 1e-300)), 0.0, upper, limit=400
        )[0]
    return val


def classify_stationary(nl: Nonlinearity, alpha: float) -> StationaryClass:
    if alpha <= 0:
        raise PreconditionError("alpha must be positive")
    crit = critical_resistance(nl)
    a0 = crit.alpha0
    if not crit.cond3_holds or (alpha > a0 and not _equal_alpha(alpha, a0)):
        return StationaryClass(alpha, a0, "unbounded", crit.cond3_holds, ell_blowup=_blowup_position(nl, alpha))
    B = crossing_B(nl, alpha)
    if B is None:
        # alpha == alpha0 and the supremum is never attained
        return StationaryClass(alpha, a0, "unbounded", True, ell_blowup=_blowup_position(nl, alpha))
    ell = half_width_ell(nl, alpha, B)
    if _equal_alpha(alpha, a0) or math.isinf(ell):
        return StationaryClass(alpha, a0, "plateau", True, B=B, ell=math.inf)
    return StationaryClass(alpha, a0, "compact", True, B=B, ell=ell)


# -- profile sampling ---------------------------------------------------------


def _theta_map(nl: Nonlinearity, B: float):
    """Chebyshev fits of x(theta) and dx/dtheta, with v = B (1 - (1 - theta)^2)."""

    def speed(theta):
        theta = np.asarray(theta, dtype=float)
        v = B * (1.0 - (1.0 - theta) ** 2)
        m = nl.mean_f(v, B)
        return np.sqrt(2.0 * B / m)

    deg = 32
    while True:
        H = _cheb_fit(speed, deg)
        tail = np.max(np.abs(H.coef[-4:]))
        if tail <= 1e-13 * np.max(np.abs(H.coef)) or deg >= 16384:
            break
        deg *= 2
    X = H.integ(lbnd=0.0)
    return X, H


def _cheb_fit(fun, deg: int) -> C.Chebyshev:
    """Chebyshev interpolant on [0, 1] through first-kind points, via a DCT."""
    k = np.arange(deg + 1)
    nodes = np.cos(np.pi * (k + 0.5) / (deg + 1))
    vals = fun(0.5 * (nodes + 1.0))
    coef = fft.dct(vals, type=2) / (deg + 1)
    coef[0] /= 2.0
    return C.Chebyshev(coef, domain=[0.0, 1.0])


def _invert(X: C.Chebyshev, H: C.Chebyshev, targets: np.ndarray) -> np.ndarray:
    table = np.linspace(0.0, 1.0, 2049)
    theta = np.interp(targets, X(table), table)
    for _ in range(50):
        step = (X(theta) - targets) / H(theta)
        theta = np.clip(theta - step, 0.0, 1.0)
        if np.max(np.abs(step), initial=0.0) < 1e-15:
            break
    return theta


def profile_V(nl: Nonlinearity, alpha: float, n: int = 1000) -> StationaryProfile:
    """Sample V_alpha on [0, 2 ell] by inverting x(v); reflection makes it symmetric."""
    sc = classify_stationary(nl, alpha)
    if not sc.is_compact:
        raise PreconditionError(f"no compactly supported stationary profile (case={sc.case})")
    B, ell = sc.B, sc.ell
    X, H = _theta_map(nl, B)
    n = int(n)
    x = 2.0 * ell * np.arange(n + 1) / n
    half = n // 2
    left = x[: half + 1]
    if n % 2 == 1:
        left = np.minimum(left, 2.0 * ell - left)
    theta = _invert(X, H, left)
    vl = B * (1.0 - (1.0 - theta) ** 2)
    vl[0] = 0.0
    v = np.empty(n + 1)
    v[: half + 1] = vl
    v[n - half :] = vl[::-1]
    if n % 2 == 0:
        v[half] = B
    return StationaryProfile(ell=ell, B=B, x=x, v=v, _X=X, _H=H)


def plateau_profile(nl: Nonlinearity, alpha: float, x_max: float):
    """Increasing solution tending to B (tangential case), as a callable on [0, x_max].

    Built from x(v) quadratures on a geometric grid of v approaching B.
    """
    B = crossing_B(nl, alpha)
    if B is None:
        raise PreconditionError("no plateau value B")
    vs = [0.0]
    k = 1
    while True:
        s = B * 0.5 ** (k / 4.0)
        vs.append(B - s)
        k += 1
        if s < 1e-12 * B:
            break
    vs = np.array(vs)
    integrand = lambda r: 1.0 / math.sqrt(max(float(_gap(nl, r, B)), 1e-300))
    xs = [0.0]
    with warnings.catch_warnings():
        # the last pieces sit against the tangential singularity at B
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(vs[:-1], vs[1:]):
            xs.append(xs[-1] + integrate.quad(integrand, a, b, limit=200)[0])
            if xs[-1] > x_max:
                break
    xs = np.array(xs)
    vs = vs[: xs.size]
    fit = interpolate.PchipInterpolator(xs, vs, extrapolate=False)

    def V(x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= 0, 0.0, fit(np.clip(x, 0.0, xs[-1])))
        return np.where(x > xs[-1], vs[-1], out)

    return V

