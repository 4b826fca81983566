"""Exact solvers and the nearest-neighbour heuristic used as reference points."""

from __future__ import annotations

import functools
import itertools

import numpy as np

from .errors import DomainError, SizeLimitError
from .instances import distance_matrix
from .tour import Tour, make_tour

BRUTE_FORCE_MAX = 12
HELD_KARP_MAX = 22
_MAX_FREE = 9


@functools.lru_cache(maxsize=None)
def _permutation_table(r):
    """All permutations of ``range(r)`` as rows, in lexicographic order."""
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.permutations(range(r))), dtype=np.int8
    )
    table = flat.reshape(-1, r) if r else np.zeros((1, 0), dtype=np.int8)
    table.setflags(write=False)
    return table


def exact_brute_force(inst) -> Tour:
    """Enumerate every cyclic order with city 0 fixed, skipping mirror images.

    Orders are visited in lexicographic order and the first minimum wins.
    """
    n = inst.n
    if n > BRUTE_FORCE_MAX:
        raise SizeLimitError(
            f"brute force is limited to {BRUTE_FORCE_MAX} cities (got {n}); "
            "use exact_held_karp for larger instances"
        )
    d = distance_matrix(inst)
    # fix a prefix after city 0 so at most 9 cities are permuted per block
    depth = max(1, n - 1 - _MAX_FREE)
    table = _permutation_table(n - 1 - depth)
    best_cost, best_order = np.inf, None
    for prefix in itertools.permutations(range(1, n), depth):
        rest = np.array([c for c in range(1, n) if c not in prefix], dtype=np.intp)
        perms = rest[table]
        last = perms[:, -1] if perms.shape[1] else np.full(len(perms), prefix[-1])
        # one orientation per cycle: the city after 0 is smaller than the one before it
        keep = last > prefix[0]
        if not keep.any():
            continue
        perms = perms[keep]
        head = 0.0
        for a, b in zip((0,) + prefix, prefix):
            head += d[a, b]
        if perms.shape[1]:
            cost = head + d[prefix[-1], perms[:, 0]] + d[perms[:, -1], 0]
            for k in range(perms.shape[1] - 1):
                cost = cost + d[perms[:, k], perms[:, k + 1]]
        else:
            cost = np.array([head + d[prefix[-1], 0]])
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost = cost[k]
            best_order = [0, *prefix, *perms[k].tolist()]
    return make_tour(inst, best_order)


def _popcount(x):
    x = x - ((x >> 1) & 0x55555555)
    x = (x & 0x33333333) + ((x >> 2) & 0x33333333)
    x = (x + (x >> 4)) & 0x0F0F0F0F
    return (x * 0x01010101 & 0xFFFFFFFF) >> 24


def exact_held_karp(inst) -> Tour:
    """Subset dynamic program over paths that start at city 0.

    ``cost[mask, j]`` is the shortest path from 0 through the cities in
    ``mask`` (bits index cities 1..n-1) ending at city ``j + 1``. Subsets are
    processed in order of size so every predecessor is final when read.
    """
    n = inst.n
    if n > HELD_KARP_MAX:
        raise SizeLimitError(f"Held-Karp is limited to {HELD_KARP_MAX} cities (got {n})")
    d = distance_matrix(inst)
    m = n - 1
    full = 1 << m
    masks = np.arange(full, dtype=np.int64)
    sizes = _popcount(masks)
    cost = np.full((full, m), np.inf)
    parent = np.full((full, m), -1, dtype=np.int8)
    single = 1 << np.arange(m)
    cost[single, np.arange(m)] = d[0, 1:]
    inner = d[1:, 1:]
    for size in range(2, m + 1):
        layer = masks[sizes == size]
        for j in range(m):
            sel = layer[(layer >> j) & 1 == 1]
            prev = sel ^ (1 << j)
            cand = cost[prev] + inner[:, j]
            k = np.argmin(cand, axis=1)
            cost[sel, j] = cand[np.arange(len(sel)), k]
            parent[sel, j] = k
    closing = cost[full - 1] + d[1:, 0]
    j = int(np.argmin(closing))
    order = []
    mask = full - 1
    while j >= 0:
        order.append(j + 1)
        j, mask = int(parent[mask, j]), mask ^ (1 << j)
    order.append(0)
    return make_tour(inst, order[::-1])


def nearest_neighbor(inst, start: int = 0) -> Tour:
    """Greedy chain from ``start``; equal distances go to the lower index."""
    n = inst.n
    if not 0 <= start < n:
        raise DomainError(f"start city {start} out of range for {n} cities")
    d = distance_matrix(inst)
    visited = np.zeros(n, dtype=bool)
    order = [start]
    visited[start] = True
    cur = start
    for _ in range(n - 1):
        row = np.where(visited, np.inf, d[cur])
        cur = int(np.argmin(row))
        visited[cur] = True
        order.append(cur)
    return make_tour(inst, order)


def nearest_neighbor_all(inst) -> list[Tour]:
    """Nearest-neighbour tour from every start city, indexed by start."""
    return [nearest_neighbor(inst, s) for s in range(inst.n)]


def nearest_neighbor_best(inst) -> Tour:
    tours = nearest_neighbor_all(inst)
    return min(tours, key=lambda t: t.cost)
