"""Limit-shape constants and curves.

For ``q > 0`` the horizon ``T_q`` is the root of ``e^{-qT} = 1 - e^{-T}`` and::

    theta_q(T)^2 = q T^2 / 2 + Li2(1 - e^{-T})
    phi_T(t; q)  = q (T - t) + log((1 - e^{-T}) / (1 - e^{-t}))     (t < T)

with ``phi_T = 0`` beyond ``T``.  The area under ``phi_T`` equals
``theta_q(T)^2``.  For ``q = 0`` the horizon is infinite (stored as ``math.inf``)
and ``phi(t) = -log(1 - e^{-t})``, ``theta_0 = pi / sqrt(6)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

PI2_6 = math.pi**2 / 6
_INF_CUTOFF = 40.0      # phi(t) < 5e-18 beyond this when T = inf


# --------------------------------------------------------------------------- #
# dilogarithm

def _li2_series(x: float) -> float:
    """``sum x^k / k^2`` for ``0 <= x <= 1/2``."""
    total, xk, k = 0.0, x, 1
    while xk > 1e-18 * k * k:
        total += xk / (k * k)
        k += 1
        xk *= x
    return total


def dilog(x: float) -> float:
    """Real dilogarithm ``Li2(x)`` on ``[0, 1]``."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"dilog needs 0 <= x <= 1, got {x!r}")
    if x <= 0.5:
        return _li2_series(x)
    if x == 1.0:
        return PI2_6
    return PI2_6 - math.log(x) * math.log1p(-x) - _li2_series(1.0 - x)


def li2_one_minus_exp(T: float) -> float:
    """``Li2(1 - e^{-T})`` for ``T > 0``, accurate at both ends (``inf`` allowed)."""
    if T == math.inf:
        return PI2_6
    if T <= math.log(2):
        return _li2_series(-math.expm1(-T))
    y = math.exp(-T)
    # reflection with x = 1 - y, log x = log1p(-y), log(1 - x) = -T
    return PI2_6 + math.log1p(-y) * T - _li2_series(y)


# --------------------------------------------------------------------------- #
# horizons and scaling constants

def _g(t, q):
    return math.exp(-q * t) + math.expm1(-t)


def solve_Tq(q: float) -> float:
    """Root of ``e^{-qT} = 1 - e^{-T}``.

    ``g(t) = e^{-qt} - 1 + e^{-t}`` is strictly decreasing from 1 to -1, so a
    geometric bisection on ``[1e-8, 1e8]`` brackets the root; Newton polishes it.
    """
    if not q > 0 or not math.isfinite(q):
        raise DomainError(f"solve_Tq needs finite q > 0, got {q!r}")
    lo, hi = 1e-8, 1e8
    while hi / lo > 1.0 + 1e-6:
        mid = math.sqrt(lo * hi)
        if _g(mid, q) > 0:
            lo = mid
        else:
            hi = mid
    t = math.sqrt(lo * hi)
    for _ in range(8):
        step = _g(t, q) / (-q * math.exp(-q * t) - math.exp(-t))
        t -= step
        if abs(step) <= 1e-16 * t:
            break
    return t


def horizon(q: float) -> float:
    """``T_q``, with ``inf`` for ``q = 0``."""
    if q < 0:
        raise DomainError("q must be >= 0")
    return math.inf if q == 0 else solve_Tq(q)


def theta_of_T(q: float, T: float) -> float:
    """``theta_q(T) = sqrt(q T^2 / 2 + Li2(1 - e^{-T}))``."""
    if q < 0 or not T > 0:
        raise DomainError("need q >= 0 and T > 0")
    if T == math.inf:
        if q > 0:
            raise DomainError("infinite horizon only for q = 0")
        return math.sqrt(PI2_6)
    return math.sqrt(0.5 * q * T * T + li2_one_minus_exp(T))


def theta(q: float) -> float:
    """``theta_q = theta_q(T_q)``; ``pi / sqrt(6)`` at ``q = 0``."""
    return theta_of_T(q, horizon(q))


def solve_T_star(q: float, tau: float) -> float:
    """Positive root of ``tau theta_q(T) = T``, i.e. ``Li2(1 - e^{-T}) / T^2 = 1/tau^2 - q/2``.

    The left side falls from ``+inf`` to 0, so a root exists iff ``tau < sqrt(2/q)``.
    """
    if q < 0 or not tau > 0:
        raise DomainError("need q >= 0 and tau > 0")
    c = 1.0 / (tau * tau) - 0.5 * q
    if not c > 0:
        raise DomainError(f"tau = {tau!r} must be below sqrt(2/q) = {math.sqrt(2 / q)!r}")

    def h(logT):
        T = math.exp(logT)
        return math.log(li2_one_minus_exp(T)) - 2 * logT - math.log(c)

    lo, hi = -1.0, 1.0
    while h(lo) <= 0:
        lo -= 2.0
    while h(hi) >= 0:
        hi += 2.0
    return math.exp(brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


def verify_duality(q: float) -> tuple[float, float, float]:
    """``(T_{1/q}, q T_q, |T_{1/q} - q T_q|)``."""
    lhs, rhs = solve_Tq(1.0 / q), q * solve_Tq(q)
    return lhs, rhs, abs(lhs - rhs)


def verify_conservation(q: float) -> float:
    """``|theta_q^2 + theta_{1/q}^2 - pi^2/6|``."""
    if not q > 0:
        raise DomainError("q must be > 0")
    return abs(theta(q) ** 2 + theta(1.0 / q) ** 2 - PI2_6)


# --------------------------------------------------------------------------- #
# curves

def _log1mexp(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(t > math.log(2), np.log1p(-np.exp(-np.minimum(t, 745.0))), np.log(-np.expm1(-t)))


def phi(q: float, T: float, t):
    """``phi_T(t; q)``; vectorized in ``t``.  ``T = inf`` requires ``q = 0``."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta <= 0):
        raise DomainError("phi needs t > 0")
    if T == math.inf:
        if q != 0:
            raise DomainError("infinite horizon only for q = 0")
        out = -_log1mexp(ta)
    else:
        if not T > 0:
            raise DomainError("T must be > 0")
        out = np.where(ta < T, q * (T - ta) + _log1mexp(T) - _log1mexp(np.minimum(ta, T)), 0.0)
        out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _simpson(f, a, b, tol, depth=60):
    """Adaptive Simpson on ``[a, b]`` with absolute tolerance ``tol``."""
    def simp(fa, fm, fb, a, b):
        return (b - a) * (fa + 4 * fm + fb) / 6

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left, right = simp(fa, flm, fm, a, m), simp(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return rec(a, m, fa, flm, fm, left, tol / 2, depth - 1) + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    return rec(a, b, fa, fm, fb, simp(fa, fm, fb, a, b), tol, depth)


def curve_area(q: float, T: float | None = None, tol: float = 1e-10) -> float:
    """``int_0^T phi_T(t; q) dt`` by adaptive Simpson.

    Near 0 the integrand behaves like ``-log t``; the piece ``[eps, 1]`` is done in
    ``u = log t`` and ``[0, eps]`` analytically.
    """
    if T is None:
        T = horizon(q)
    f = (lambda t: -float(_log1mexp(t))) if T == math.inf else (lambda t: phi(q, T, t))
    top = _INF_CUTOFF if T == math.inf else T
    eps = 1e-14
    A = 0.0 if T == math.inf else q * T + float(_log1mexp(T))
    head = eps * (A + 1.0 - math.log(eps))
    split = min(1.0, top)
    mid = _simpson(lambda u: f(math.exp(u)) * math.exp(u), math.log(eps), math.log(split), tol / 4)
    rest = _simpson(f, split, top, tol / 4) if top > split else 0.0
    return head + mid + rest


class Scaling(enum.Enum):
    INTRINSIC = "intrinsic"
    UNIT_AREA = "unit-area"


@dataclass(frozen=True)
class ShapeConstants:
    q: float
    T_q: float
    theta_q: float

    @classmethod
    def for_q(cls, q: float) -> "ShapeConstants":
        return cls(q, horizon(q), theta(q))

    def as_dict(self):
        return {"q": self.q, "T_q": None if self.T_q == math.inf else self.T_q, "theta_q": self.theta_q}


@dataclass(frozen=True)
class ShapeCurve:
    """``phi_T(.; q)`` in intrinsic coordinates or rescaled to unit area."""
    q: float
    T: float
    scaling: Scaling = Scaling.UNIT_AREA

    @property
    def theta(self) -> float:
        return theta_of_T(self.q, self.T)

    @property
    def horizon(self) -> float:
        return self.T if self.scaling is Scaling.INTRINSIC else self.T / self.theta

    def __call__(self, t):
        if self.scaling is Scaling.INTRINSIC:
            return phi(self.q, self.T, t)
        th = self.theta
        return phi(self.q, self.T, np.asarray(t, dtype=float) * th) / th


def sample_curve(q: float, T: float | None = None, scaling: Scaling | str = Scaling.UNIT_AREA,
                 n_points: int = 200, t_cap: float = 10.0) -> list[tuple[float, float]]:
    """``n_points`` equally spaced points ``(t, y)`` on ``(0, min(horizon, t_cap)]``."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if T is None:
        T = horizon(q)
    curve = ShapeCurve(q, T, Scaling(scaling))
    top = min(curve.horizon, t_cap)
    t = top * np.arange(1, n_points + 1) / n_points
    y = curve(t)
    return list(zip(t.tolist(), np.atleast_1d(y).tolist()))
