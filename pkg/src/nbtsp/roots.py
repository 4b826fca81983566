"""Bracketed root finding for monotone scalar functions."""

import math

from .errors import ConvergenceError

MAX_ITER = 200


def solve_bracketed(f, lo, hi, fprime=None, ftol=1e-13, xtol=0.0, max_iter=MAX_ITER):
    """Find a root of ``f`` inside ``[lo, hi]`` where ``f(lo)`` and ``f(hi)`` differ in sign.

    Newton steps are taken when ``fprime`` is given and the step stays strictly
    inside the current bracket; otherwise the bracket is bisected. The bracket
    always shrinks, so the iteration cannot diverge.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ConvergenceError("root is not bracketed", (lo, hi))
    increasing = fhi > 0

    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if abs(fx) <= ftol:
            return x
        if (fx > 0) == increasing:
            hi = x
        else:
            lo = x
        if hi - lo <= xtol * max(abs(lo), abs(hi)) or not lo < 0.5 * (lo + hi) < hi:
            return x
        x_next = None
        if fprime is not None:
            d = fprime(x)
            if d != 0.0 and math.isfinite(d):
                cand = x - fx / d
                if lo < cand < hi:
                    x_next = cand
        x = x_next if x_next is not None else 0.5 * (lo + hi)
    raise ConvergenceError(f"no convergence after {max_iter} iterations", (lo, hi))
