"""Lennard-Jones type force functions and their geometric reparameterization.

A force function ``F(r) = G/r**q - H/r**p`` (``q > p > 0``) is positive
(repulsive) below its root ``L`` and attractive beyond it, reaching its
strongest attraction ``-M`` at ``r_min`` before decaying back to zero.
The same curve can be described by the canonical coefficients
``(G, H, q, p)`` or by the shape quantities ``(L, r_min, M, delta)`` where
``delta = q - p``. This module converts between the two and solves for the
decay exponent that places a chosen fraction of ``M`` at a chosen radius.

Everything here is evaluated through logarithms and ``expm1`` so that
exponents in the hundreds or thousands stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    DomainError,
    InfeasibleTargetError,
    InvalidShapeError,
    LjfOverflowError,
    UnsupportedExponentError,
)
from .roots import MAX_ITER, solve_bracketed

_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class LjfCanonical:
    """Canonical coefficients ``G/r**q - H/r**p``.

    Alongside the four public numbers the instance keeps ``log_H``, the log
    of the root ``log_L = log(G/H)/(q-p)`` and the gap ``q - p``. They are
    derived from the public fields when omitted. Keeping them separately
    matters in two cases: converting an extreme shape can give coefficients
    beyond double range (``G = inf`` with a finite log), and when ``p`` is
    large relative to ``q - p`` the rounded ``q`` and ``G`` no longer pin
    down the shape to full precision.
    """

    G: float
    H: float
    q: float
    p: float
    log_H: float = field(default=None, repr=False, compare=False)
    log_L: float = field(default=None, repr=False, compare=False)
    gap: float = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise DomainError(f"exponents must be positive, got q={self.q}, p={self.p}")
        if not self.q > self.p:
            raise DomainError(f"need q > p, got q={self.q}, p={self.p}")
        if self.gap is None:
            object.__setattr__(self, "gap", self.q - self.p)
        if self.log_H is None:
            object.__setattr__(self, "log_H", _checked_log(self.H, "H"))
        if self.log_L is None:
            log_G = _checked_log(self.G, "G")
            ratio = self.G / self.H
            log_ratio = math.log(ratio) if 0 < ratio < math.inf else log_G - self.log_H
            object.__setattr__(self, "log_L", log_ratio / self.gap)
        if not (math.isfinite(self.log_H) and math.isfinite(self.log_L)):
            raise DomainError("coefficients must be positive and finite in log space")

    @classmethod
    def from_root(cls, log_H, log_L, p, delta):
        """Build from ``log H``, ``log L``, ``p`` and ``delta = q - p``."""
        log_G = log_H + delta * log_L
        return cls(
            _exp_or_inf(log_G), _exp_or_inf(log_H), p + delta, p,
            log_H=log_H, log_L=log_L, gap=delta,
        )

    @property
    def delta(self):
        return self.gap

    @property
    def log_G(self):
        return self.log_H + self.gap * self.log_L


@dataclass(frozen=True)
class LjfShape:
    """Shape quantities: root ``L``, minimum location ``r_min``, depth ``M``, decay ``delta``."""

    L: float
    r_min: float
    M: float
    delta: float

    def __post_init__(self):
        for name in ("L", "r_min", "M", "delta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidShapeError(f"{name} must be positive and finite, got {v!r}")
        if not self.L < self.r_min:
            raise InvalidShapeError(f"need L < r_min, got L={self.L}, r_min={self.r_min}")


def _checked_log(x, name):
    if not x > 0:
        raise DomainError(f"{name} must be positive, got {x!r}")
    return math.log(x)


def _exp_or_inf(x):
    return math.exp(x) if x < _LOG_MAX else math.inf


def _log_expm1(x):
    """``log(exp(x) - 1)`` for ``x > 0`` without overflow."""
    if x > 30.0:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


def force_eval(params: LjfCanonical, r):
    """Evaluate ``F(r)``; positive values are repulsive.

    Computed as ``H/r**p * ((L/r)**delta - 1)``, which is algebraically the
    canonical form but avoids forming ``G/r**q`` directly.
    """
    if not r > 0:
        raise DomainError(f"r must be positive, got {r!r}")
    log_r = math.log(r)
    t = params.delta * (params.log_L - log_r)
    if t == 0.0:
        return 0.0
    log_mag = params.log_H - params.p * log_r
    if t > 0:
        log_mag += _log_expm1(t)
        sign = 1.0
    else:
        log_mag += math.log(-math.expm1(t))
        sign = -1.0
    if log_mag >= _LOG_MAX:
        raise LjfOverflowError(r)
    return sign * math.exp(log_mag)


def shape_from_canonical(params: LjfCanonical) -> tuple[LjfShape, float]:
    """Return ``(shape, r_infl)`` for canonical parameters."""
    p, d = params.p, params.delta
    q = p + d
    log_L = params.log_L
    log_rmin = math.log1p(d / p) / d + log_L
    # 1 - p/q = d/q
    log_M = params.log_H - p * log_rmin + math.log(d / q)
    log_rinfl = math.log1p(d / (p + 1)) / d + log_rmin
    values = [log_L, log_rmin, log_M, log_rinfl]
    if not all(-_LOG_MAX < v < _LOG_MAX for v in values):
        raise DomainError(f"shape of {params} lies outside double range")
    L, r_min, M, r_infl = map(math.exp, values)
    return LjfShape(L, r_min, M, d), r_infl


def _attractive_exponent(log_ratio, delta):
    """``p = delta / ((r_min/L)**delta - 1)``, stable for large and small ``delta``."""
    x = delta * log_ratio
    return delta * math.exp(-x) / -math.expm1(-x)


def canonical_from_shape(shape: LjfShape) -> LjfCanonical:
    """Invert :func:`shape_from_canonical`; ``p``, ``q``, ``H``, ``G`` are built in that order."""
    if not shape.L < shape.r_min:
        raise InvalidShapeError(f"need L < r_min, got L={shape.L}, r_min={shape.r_min}")
    d = shape.delta
    log_L = math.log(shape.L)
    log_rmin = math.log(shape.r_min)
    p = _attractive_exponent(log_rmin - log_L, d)
    if not p > 0:
        raise InvalidShapeError(
            f"attractive exponent underflows for delta={d} and r_min/L={shape.r_min / shape.L}"
        )
    log_H = math.log(shape.M) + p * log_rmin - math.log(d / (p + d))
    return LjfCanonical.from_root(log_H, log_L, p, d)


def shape_force(L, r_min, M, delta, r):
    """Force written directly in shape parameters; broadcasts over numpy arrays.

    ``M * (r_min/r)**p * ((L/r)**delta - 1) / (1 - (L/r_min)**delta)``
    """
    L, r_min, M, delta, r = np.broadcast_arrays(*map(np.asarray, (L, r_min, M, delta, r)))
    log_ratio = np.log(r_min / L)
    x = delta * log_ratio
    p = delta * np.exp(-x) / -np.expm1(-x)
    with np.errstate(over="ignore"):
        out = (
            M
            * np.exp(p * np.log(r_min / r))
            * np.expm1(delta * np.log(L / r))
            / -np.expm1(-x)
        )
    return out[()] if out.ndim == 0 else out


def dlogforce_ddelta(L, r_min, delta, r):
    """Partial derivative of ``log(-F)`` with respect to ``delta`` at fixed ``L, r_min, M``.

    Valid for ``r > r_min``, where ``F < 0``.
    """
    a = math.log(r_min / L)
    b = math.log(r / L)
    e_a = math.expm1(delta * a) if delta * a < _LOG_MAX else math.inf
    e_b = math.expm1(delta * b) if delta * b < _LOG_MAX else math.inf
    first = (1.0 / e_a - delta * a * (1.0 + 1.0 / e_a) / e_a) * (a - b)
    return first + b / e_b - a / e_a


def decay_profile(L, r_min, r):
    """Limit of ``-F(r)/M`` as ``delta -> 0``; equals 1 at ``r_min`` and decreases to 0."""
    if not 0 < L < r_min:
        raise InvalidShapeError(f"need 0 < L < r_min, got L={L}, r_min={r_min}")
    if not r >= r_min:
        raise DomainError(f"decay profile is defined for r >= r_min ({r_min}), got {r!r}")
    a = math.log(r_min / L)
    s = math.log(r / L)
    return math.exp(-(s - a) / a) * s / a


def solve_R_eps(L, r_min, eps, tol=1e-13):
    """Radius where the decay profile drops to ``eps``; the infimum of attainable ``r_eps``.

    Solved on the log scale, so ``tol`` bounds the relative error of the profile value.
    """
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    if not 0 < L < r_min:
        raise InvalidShapeError(f"need 0 < L < r_min, got L={L}, r_min={r_min}")
    a = math.log(r_min / L)
    log_eps = math.log(eps)

    # work in s = log(r/L), where log T(s) = 1 - s/a + log(s/a)
    def g(s):
        return 1.0 - s / a + math.log(s / a) - log_eps

    def dg(s):
        return 1.0 / s - 1.0 / a

    lo = a
    hi = a + math.log(2.0)
    for _ in range(MAX_ITER):
        if g(hi) < 0:
            break
        lo, hi = hi, a + 2.0 * (hi - a)
    else:
        raise ConvergenceError("could not bracket R_eps", (L * math.exp(lo), L * math.exp(hi)))
    if g(lo) <= 0:  # eps so close to 1 that the root is r_min itself to working precision
        return r_min
    s = solve_bracketed(g, lo, hi, fprime=dg, ftol=tol)
    return L * math.exp(s)


def _log_force_fraction(L, r_min, delta, r):
    """``log(-F(r)/M)`` for ``r > r_min``, kept finite where ``F`` itself underflows."""
    x = delta * math.log(r_min / L)
    p = _attractive_exponent(math.log(r_min / L), delta)
    return (p * math.log(r_min / r) + math.log(-math.expm1(delta * math.log(L / r)))
            - math.log(-math.expm1(-x)))


def solve_delta(L, r_min, M, eps, r_eps, tol=1e-12):
    """Decay exponent ``delta`` for which ``F(r_eps) = -eps * M``.

    Solutions exist exactly when ``r_eps`` exceeds :func:`solve_R_eps`; the
    residual ``log(-F/M) - log(eps)`` is strictly increasing in ``delta`` there,
    and ``tol`` bounds it, so tiny ``eps`` keeps full relative accuracy.
    """
    LjfShape(L, r_min, M, 1.0)
    R = solve_R_eps(L, r_min, eps)
    if not r_eps > R:
        raise InfeasibleTargetError(
            f"r_eps={r_eps!r} is not attainable; it must exceed R_eps={R!r}"
        )

    log_eps = math.log(eps)

    # log(-F/M) rises with delta
    def g(delta):
        return _log_force_fraction(L, r_min, delta, r_eps) - log_eps

    def dg(delta):
        return dlogforce_ddelta(L, r_min, delta, r_eps)

    lo, hi = 1.0, 1.0
    for _ in range(MAX_ITER):
        if g(lo) < 0:
            break
        lo *= 0.5
    else:
        raise ConvergenceError("could not bracket delta from below", (lo, hi))
    for _ in range(MAX_ITER):
        if g(hi) > 0:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise ConvergenceError("could not bracket delta from above", (lo, hi))
    return solve_bracketed(g, lo, hi, fprime=dg, ftol=tol)


def potential_eval(params: LjfCanonical, r):
    """Potential ``U`` with ``-dU/dr = F`` and ``U -> 0`` at infinity (for ``p > 1``)."""
    if params.q == 1 or params.p == 1:
        raise UnsupportedExponentError(
            f"closed-form potential needs q != 1 and p != 1, got q={params.q}, p={params.p}"
        )
    if not r > 0:
        raise DomainError(f"r must be positive, got {r!r}")
    log_r = math.log(r)
    rep = math.exp(params.log_G - (params.q - 1) * log_r) / (params.q - 1)
    att = math.exp(params.log_H - (params.p - 1) * log_r) / (params.p - 1)
    return rep - att
