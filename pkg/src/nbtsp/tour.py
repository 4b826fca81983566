"""Tours: cost, percent error, canonical form and ring extraction."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAngleError, DomainError, ParseError, ValidationError


@dataclass(frozen=True)
class Tour:
    order: tuple
    cost: float

    def __len__(self):
        return len(self.order)


def validate_permutation(order, n):
    order = [int(i) for i in order]
    if len(order) == n and sorted(order) == list(range(n)):
        return order
    counts = Counter(order)
    dups = sorted(i for i, c in counts.items() if c > 1)
    missing = sorted(set(range(n)) - set(counts))
    extra = sorted(i for i in counts if not 0 <= i < n)
    parts = []
    if dups:
        parts.append(f"duplicates {dups}")
    if missing:
        parts.append(f"missing {missing}")
    if extra:
        parts.append(f"out of range {extra}")
    raise ValidationError(f"not a permutation of 0..{n - 1}: " + ", ".join(parts))


def tour_cost(inst, order) -> float:
    """Length of the closed cycle visiting ``order``; summed in tour order."""
    pts = inst.cities
    order = validate_permutation(order, len(pts))
    p = pts[order]
    seg = np.roll(p, -1, axis=0) - p
    return float(math.fsum(np.hypot(seg[:, 0], seg[:, 1]).tolist()))


def canonical_order(order):
    """Rotate to start at city 0 and orient so the second city is the smaller neighbour."""
    order = list(order)
    k = order.index(0)
    order = order[k:] + order[:k]
    if len(order) > 2 and order[-1] < order[1]:
        order = [order[0]] + order[:0:-1]
    return tuple(order)


def make_tour(inst, order) -> Tour:
    order = canonical_order(validate_permutation(order, inst.n))
    return Tour(order, tour_cost(inst, order))


def percent_error(approx_cost, exact_cost) -> float:
    if not exact_cost > 0:
        raise DomainError(f"exact cost must be positive, got {exact_cost!r}")
    return (approx_cost - exact_cost) / exact_cost * 100.0


def angular_order(positions, origin=(0.0, 0.0)):
    """City indices sorted by polar angle in ``[0, 2*pi)`` about ``origin``.

    Ties in angle go to the particle nearer the origin, then the lower index.
    """
    rel = np.asarray(positions, dtype=float) - np.asarray(origin, dtype=float)
    radius = np.hypot(rel[:, 0], rel[:, 1])
    if np.any(radius == 0.0):
        bad = np.flatnonzero(radius == 0.0).tolist()
        raise DegenerateAngleError(f"particles {bad} sit exactly at the origin")
    theta = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2.0 * np.pi)
    # mod can round a tiny negative angle up to exactly 2*pi
    theta[theta >= 2.0 * np.pi] = 0.0
    idx = np.arange(len(rel))
    return np.lexsort((idx, radius, theta)).tolist()


def extract_tour(inst, final_positions, origin=(0.0, 0.0)) -> Tour:
    """Read a tour off a ring of particles; the cost uses the original city coordinates."""
    final_positions = np.asarray(final_positions, dtype=float)
    if final_positions.shape != (inst.n, 2):
        raise ValidationError(
            f"expected {inst.n} final positions, got array of shape {final_positions.shape}"
        )
    return make_tour(inst, angular_order(final_positions, origin))


def format_tour(tour: Tour) -> str:
    return f"cost={tour.cost!r}\n" + " ".join(map(str, tour.order)) + "\n"


def parse_tour(text: str) -> Tour:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 2 or not lines[0].startswith("cost="):
        raise ParseError("tour file must be 'cost=<value>' followed by one line of indices")
    try:
        cost = float(lines[0][len("cost="):])
        order = tuple(int(t) for t in lines[1].split())
    except ValueError as exc:
        raise ParseError(f"malformed tour file: {exc}") from None
    validate_permutation(order, len(order))
    return Tour(order, cost)
