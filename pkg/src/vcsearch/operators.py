"""Real-coded evolutionary operators and non-dominated ranking.

All randomness is drawn from an explicitly passed generator so that engine
runs are reproducible from a single seed.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Weak Pareto domination under minimization: a <= b everywhere, < somewhere."""
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def fast_non_dominated_sort(points: Sequence[Sequence[float]]) -> list[list[int]]:
    """Deb's front layering; returns index lists, front 0 first."""
    n = len(points)
    for p in points:
        if not all(math.isfinite(x) for x in p):
            raise ValueError("non-finite objective component")
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts: list[list[int]] = [[]]
    for p in range(n):
        for q in range(p + 1, n):
            if dominates(points[p], points[q]):
                dominated_by[p].append(q)
                domination_count[q] += 1
            elif dominates(points[q], points[p]):
                dominated_by[q].append(p)
                domination_count[p] += 1
        if domination_count[p] == 0:
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                domination_count[q] -= 1
                if domination_count[q] == 0:
                    nxt.append(q)
        i += 1
        fronts.append(sorted(nxt))
    fronts.pop()
    return fronts


def crowding_distance(front: Sequence[Sequence[float]]) -> list[float]:
    """Per-point crowding distance; boundary points and tiny fronts get +inf.

    A zero-span objective contributes nothing to interior points.
    """
    n = len(front)
    if n == 0:
        raise ValueError("empty front")
    if n <= 2:
        return [math.inf] * n
    m = len(front[0])
    distance = [0.0] * n
    for obj in range(m):
        order = sorted(range(n), key=lambda i: front[i][obj])
        lo = front[order[0]][obj]
        hi = front[order[-1]][obj]
        distance[order[0]] = math.inf
        distance[order[-1]] = math.inf
        span = hi - lo
        if span == 0.0:
            continue
        for rank in range(1, n - 1):
            i = order[rank]
            if distance[i] == math.inf:
                continue
            gap = front[order[rank + 1]][obj] - front[order[rank - 1]][obj]
            distance[i] += gap / span
    return distance


def sbx_crossover(
    p1: Sequence[float],
    p2: Sequence[float],
    lowers: Sequence[float],
    uppers: Sequence[float],
    rate: float,
    eta: float,
    rng: np.random.Generator,
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Simulated binary crossover; children clamped to bounds.

    Before clamping, child means equal parent means in every branch.
    """
    c1 = list(p1)
    c2 = list(p2)
    power = 1.0 / (eta + 1.0)

    def spread(u, beta):
        alpha = 2.0 - beta ** -(eta + 1.0)
        if u <= 1.0 / alpha:
            return (u * alpha) ** power
        return (1.0 / (2.0 - u * alpha)) ** power

    if rng.random() <= rate:
        for i in range(len(p1)):
            if rng.random() > 0.5:
                continue
            x1, x2 = p1[i], p2[i]
            if abs(x1 - x2) < 1e-14:
                continue
            y1, y2 = (x1, x2) if x1 < x2 else (x2, x1)
            lo, hi = lowers[i], uppers[i]
            u = rng.random()
            # bounded SBX: the spread contracts near the domain edges so
            # children land inside the box instead of piling on the bounds
            beta_lo = spread(u, 1.0 + 2.0 * (y1 - lo) / (y2 - y1))
            beta_hi = spread(u, 1.0 + 2.0 * (hi - y2) / (y2 - y1))
            lo_child = 0.5 * ((y1 + y2) - beta_lo * (y2 - y1))
            hi_child = 0.5 * ((y1 + y2) + beta_hi * (y2 - y1))
            lo_child = min(max(lo_child, lo), hi)
            hi_child = min(max(hi_child, lo), hi)
            # distribute the near-y1/near-y2 values randomly between the
            # children so crossover actually recombines variable subsets
            if rng.random() <= 0.5:
                c1[i], c2[i] = hi_child, lo_child
            else:
                c1[i], c2[i] = lo_child, hi_child
    return tuple(c1), tuple(c2)


def polynomial_mutation(
    values: Sequence[float],
    lowers: Sequence[float],
    uppers: Sequence[float],
    rate: float,
    eta: float,
    rng: np.random.Generator,
) -> tuple[float, ...]:
    """Bounded polynomial mutation, each variable mutated with probability rate."""
    out = list(values)
    for i in range(len(values)):
        if rng.random() > rate:
            continue
        lo, hi = lowers[i], uppers[i]
        span = hi - lo
        if span <= 0.0:
            continue
        x = out[i]
        d1 = (x - lo) / span
        d2 = (hi - x) / span
        u = rng.random()
        power = 1.0 / (eta + 1.0)
        if u <= 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            delta = val**power - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            delta = 1.0 - val**power
        x += delta * span
        out[i] = min(max(x, lo), hi)
    return tuple(out)
