"""Compiled inner loop of the simulation.

Mirrors ``sim.pair_forces``/``sim.wall_forces``/``sim.step`` exactly in
order of operations; pair contributions are accumulated over ``i < j`` in
index order so results are reproducible bit for bit.
"""

import math

import numpy as np
from numba import njit

RING_FORMED = 0
STEPS_DONE = 1
MAX_STEPS = 2
BLOWUP = 3
SINGULAR = 4

_COINCIDENT = 1e-12


@njit(cache=True)
def forces(pos, natural, coeff, p, q, int_delta, k, w, r_inner, r_outer, bub_c, bub_r, bub_on,
           out):
    """Fill ``out`` with the net force; returns (outer_reaction, singular_i, singular_j).

    ``int_delta > 0`` means ``q - p`` is that small integer and ``s**(q-p)``
    is formed by repeated multiplication.
    """
    n = pos.shape[0]
    for i in range(n):
        out[i, 0] = 0.0
        out[i, 1] = 0.0
    for i in range(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        for j in range(i + 1, n):
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            r = math.hypot(dx, dy)
            if r < _COINCIDENT:
                return 0.0, i, j
            s = natural[i, j] / r
            sp = s**p
            if int_delta > 0:
                sd = s
                for _ in range(int_delta - 1):
                    sd *= s
            else:
                sd = s ** (q - p)
            f = coeff * sp * (sd - 1.0) / r
            out[i, 0] += f * dx
            out[i, 1] += f * dy
            out[j, 0] -= f * dx
            out[j, 1] -= f * dy
    reaction = 0.0
    for i in range(n):
        x = pos[i, 0]
        y = pos[i, 1]
        rho = math.hypot(x, y)
        depth_out = rho - (r_outer - w)
        if depth_out < 0.0:
            depth_out = 0.0
        depth_in = (r_inner + w) - rho
        if depth_in < 0.0:
            depth_in = 0.0
        reaction += depth_out
        if rho > 0.0:
            m = k * (depth_in - depth_out) / rho
            out[i, 0] += x * m
            out[i, 1] += y * m
        for b in range(bub_r.shape[0]):
            if not bub_on[b]:
                continue
            bx = x - bub_c[b, 0]
            by = y - bub_c[b, 1]
            d = math.hypot(bx, by)
            depth = (bub_r[b] + w) - d
            if depth > 0.0 and d > 0.0:
                m = k * depth / d
                out[i, 0] += bx * m
                out[i, 1] += by * m
    return k * reaction, -1, -1


@njit(cache=True)
def advance(pos, vel, natural, coeff, p, q, int_delta, k, w, gamma, dt, growth,
            r_inner, r_outer, bub_c, bub_r, bub_on, bub_max,
            pressure_on, p_low, p_high, adj_rate, gap_stop,
            n_steps, check_ring, advance_walls):
    """Run up to ``n_steps`` steps in place.

    Returns ``(status, steps_taken, r_inner, r_outer, info_a, info_b)`` where
    the info fields carry the offending pair (SINGULAR) or the max force (BLOWUP).
    """
    n = pos.shape[0]
    force = np.empty((n, 2))
    ring_gap = gap_stop * (1.0 + 1e-9)
    taken = 0
    while taken < n_steps:
        if check_ring and r_outer - r_inner <= ring_gap:
            return RING_FORMED, taken, r_inner, r_outer, 0.0, 0.0
        reaction, si, sj = forces(pos, natural, coeff, p, q, int_delta, k, w, r_inner, r_outer,
                                  bub_c, bub_r, bub_on, force)
        if si >= 0:
            return SINGULAR, taken, r_inner, r_outer, float(si), float(sj)
        finite = True
        for i in range(n):
            for c in range(2):
                vel[i, c] = vel[i, c] + (force[i, c] - gamma * vel[i, c]) * dt
                pos[i, c] = pos[i, c] + vel[i, c] * dt
                if not (math.isfinite(vel[i, c]) and math.isfinite(pos[i, c])):
                    finite = False
        if not finite:
            fmax = 0.0
            for i in range(n):
                fm = math.hypot(force[i, 0], force[i, 1])
                if math.isfinite(fm) and fm > fmax:
                    fmax = fm
                elif not math.isfinite(fm):
                    fmax = math.inf
            return BLOWUP, taken + 1, r_inner, r_outer, fmax, 0.0
        if advance_walls:
            new_outer = r_outer
            if pressure_on:
                pr = reaction / (2.0 * math.pi * r_outer)
                if pr > p_high:
                    new_outer = r_outer + adj_rate * dt
                elif pr < p_low:
                    new_outer = max(r_outer - adj_rate * dt, r_inner + gap_stop)
            new_inner = min(r_inner + growth * dt, new_outer - gap_stop)
            if new_inner > r_inner:
                r_inner = new_inner
            r_outer = new_outer
            for b in range(bub_r.shape[0]):
                if not bub_on[b]:
                    continue
                bub_r[b] = min(bub_r[b] + growth * dt, bub_max)
                # retire once the inner wall's band meets the bubble's band
                if math.hypot(bub_c[b, 0], bub_c[b, 1]) - bub_r[b] <= r_inner + 2.0 * w:
                    bub_on[b] = False
        taken += 1
    if check_ring and r_outer - r_inner <= ring_gap:
        return RING_FORMED, taken, r_inner, r_outer, 0.0, 0.0
    return STEPS_DONE, taken, r_inner, r_outer, 0.0, 0.0
