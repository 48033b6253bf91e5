"""Pareto-front quality indicators and the two statistical tests.

IGD is computed after per-axis min-max normalization over the union of the
candidate and reference sets, since the three objectives carry
incommensurate units.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import dominates


@dataclass(frozen=True)
class FrontSet:
    points: tuple[tuple[float, ...], ...]
    provenance: tuple[tuple[str, int], ...] = ()  # (algorithm, seed) per point


def extract_pareto_front(
    points: Sequence[Sequence[float]],
    provenance: Sequence[tuple[str, int]] | None = None,
) -> FrontSet:
    """Maximal nondominated subset; duplicates collapse to one representative."""
    unique: dict[tuple[float, ...], tuple[str, int]] = {}
    for i, p in enumerate(points):
        key = tuple(float(x) for x in p)
        if key not in unique:
            unique[key] = provenance[i] if provenance else ("", 0)
    keys = list(unique)
    keep = []
    for i, p in enumerate(keys):
        if not any(dominates(q, p) for j, q in enumerate(keys) if j != i):
            keep.append(p)
    return FrontSet(
        points=tuple(keep), provenance=tuple(unique[p] for p in keep)
    )


def build_reference_front(fronts: Sequence[FrontSet]) -> FrontSet:
    """Union of fronts re-filtered to the nondominated subset."""
    if not fronts:
        raise ValueError("no fronts to merge")
    points: list[tuple[float, ...]] = []
    provenance: list[tuple[str, int]] = []
    for f in fronts:
        points.extend(f.points)
        provenance.extend(f.provenance or [("", 0)] * len(f.points))
    return extract_pareto_front(points, provenance)


def igd(front: FrontSet, reference: FrontSet) -> float:
    """Mean distance from each reference point to its nearest front point."""
    if not reference.points:
        raise ValueError("empty reference front")
    if not front.points:
        return math.inf
    ref = np.asarray(reference.points, dtype=np.float64)
    fr = np.asarray(front.points, dtype=np.float64)
    union = np.vstack([ref, fr])
    lo = union.min(axis=0)
    span = union.max(axis=0) - lo
    span[span == 0.0] = 1.0  # zero-span axes contribute 0 after normalization
    ref_n = (ref - lo) / span
    fr_n = (fr - lo) / span
    diffs = ref_n[:, None, :] - fr_n[None, :, :]
    dists = np.sqrt((diffs**2).sum(axis=2))
    return float(dists.min(axis=1).mean())


def _rank_sum_u(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """U statistics for both samples using mid-ranks for ties."""
    pooled = sorted((v, 0) for v in a) + sorted((v, 1) for v in b)
    pooled.sort(key=lambda t: t[0])
    n = len(pooled)
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and pooled[j + 1][0] == pooled[i][0]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[k] = mid
        i = j + 1
    r1 = sum(r for r, (_, grp) in zip(ranks, pooled) if grp == 0)
    n1, n2 = len(a), len(b)
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1
    return u1, u2


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test.

    Exact p by enumerating group assignments when the smaller sample has at
    most 8 observations; normal approximation with tie and continuity
    corrections otherwise.  Returns (U of the first sample, p).
    """
    if not a or not b:
        raise ValueError("both samples must be nonempty")
    n1, n2 = len(a), len(b)
    u1, u2 = _rank_sum_u(a, b)
    pooled = list(a) + list(b)
    if len(set(pooled)) == 1:
        return u1, 1.0

    if min(n1, n2) <= 8:
        u_lo, u_hi = min(u1, u2), max(u1, u2)
        ranks = _midranks(pooled)
        offset = n1 * (n1 + 1) / 2.0
        total = 0
        extreme = 0
        eps = 1e-9
        for combo in itertools.combinations(range(n1 + n2), n1):
            u = sum(ranks[i] for i in combo) - offset
            total += 1
            if u <= u_lo + eps or u >= u_hi - eps:
                extreme += 1
        return u1, min(1.0, extreme / total)

    # Normal approximation with tie correction.
    n = n1 + n2
    mean = n1 * n2 / 2.0
    tie_counts: dict[float, int] = {}
    for v in pooled:
        tie_counts[v] = tie_counts.get(v, 0) + 1
    tie_term = sum(t**3 - t for t in tie_counts.values())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return u1, 1.0
    z = (abs(u1 - mean) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = math.erfc(z / math.sqrt(2.0))
    return u1, min(1.0, p)


def vargha_delaney_a12(a: Sequence[float], b: Sequence[float]) -> float:
    """Probability that a random draw from `a` exceeds one from `b`, with
    ties counted half."""
    if not a or not b:
        raise ValueError("both samples must be nonempty")
    wins = 0.0
    for x in a:
        for y in b:
            if x > y:
                wins += 1.0
            elif x == y:
                wins += 0.5
    return wins / (len(a) * len(b))


def a12_magnitude(a12: float) -> str:
    """Effect-size band of the direction-folded A12."""
    folded = min(a12, 1.0 - a12)
    if folded <= 0.286:
        return "large"
    if folded <= 0.362:
        return "medium"
    if folded <= 0.444:
        return "small"
    return "negligible"
