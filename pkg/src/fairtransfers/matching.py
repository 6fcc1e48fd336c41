"""Exact maximum-weight bipartite matching and the assignment subroutines on it.

The Hungarian method runs over exact rational (or radical) potentials, so the
optimum is exact; a refinement pass then picks the lexicographically smallest
permutation among the optima, which pins down every tie-break downstream.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ._num import Num, sign
from .model import Allocation, Instance, InstanceFormatError, check_partition

F0 = Fraction(0)


def _hungarian_max(weights) -> Num:
    """Optimal total weight of a perfect matching on a square matrix."""
    n = len(weights)
    if n == 0:
        return F0
    # classic potentials formulation on costs = -weights; None acts as +inf
    cost = [[-w for w in row] for row in weights]
    u = [F0] * (n + 1)
    v = [F0] * (n + 1)
    match = [0] * (n + 1)  # match[j] = row assigned to column j (1-based, 0 = none)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [None] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = None
            j1 = -1
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if minv[j] is None or sign(cur - minv[j]) < 0:
                    minv[j] = cur
                    way[j] = j0
                if delta is None or sign(minv[j] - delta) < 0:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                elif minv[j] is not None:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    total = F0
    for j in range(1, n + 1):
        total += weights[match[j] - 1][j - 1]
    return total


def max_weight_assignment(weights: Sequence[Sequence[Num]]):
    """Exact optimal assignment on a square weight matrix.

    Returns (perm, total) where perm[i] is the column given to row i and the
    permutation is the lexicographically smallest one attaining the optimum.
    """
    n = len(weights)
    if any(len(row) != n for row in weights):
        raise InstanceFormatError("weight matrix must be square")
    if n == 0:
        return (), F0
    best_total = _hungarian_max(weights)
    perm = [0] * n
    free_cols = list(range(n))
    prefix = F0
    for i in range(n):
        rest_rows = range(i + 1, n)
        for idx, j in enumerate(free_cols):
            sub = [[weights[r][c] for k, c in enumerate(free_cols) if k != idx] for r in rest_rows]
            completion = _hungarian_max(sub)
            if sign(prefix + weights[i][j] + completion - best_total) == 0:
                perm[i] = j
                prefix += weights[i][j]
                free_cols.pop(idx)
                break
        else:  # pragma: no cover - a completion always exists
            raise AssertionError("no optimal completion found")
    return tuple(perm), best_total


def reassign_bundles(inst: Instance, base: Allocation):
    """Permute bundles to maximize utilitarian welfare (Hungarian, exact).

    Returns (allocation, perm) with allocation.bundles[i] = base.bundles[perm[i]].
    The result never has less utilitarian welfare than the input and is always
    envy-freeable.
    """
    check_partition(inst, base)
    weights = [[inst.value(i, b) for b in base.bundles] for i in range(inst.n)]
    perm, _ = max_weight_assignment(weights)
    return Allocation(tuple(base.bundles[perm[i]] for i in range(inst.n))), perm


def iterated_matching(inst: Instance, items: int, start: Allocation) -> Allocation:
    """Allocate ``items`` by rounds of maximum-weight matching on marginal values.

    Each round matches at most one still-unallocated item to each agent; the
    matrix entry is the agent's marginal value for the item given its current
    bundle (for additive valuations this is just the item value).  Matched
    items are allocated even at zero marginal; rounds repeat until nothing is
    left.
    """
    bundles = list(start.bundles)
    held = 0
    for b in bundles:
        if b & items:
            raise InstanceFormatError("items to allocate overlap the start allocation")
        held |= b
    if held & items:
        raise InstanceFormatError("items to allocate overlap the start allocation")
    remaining = [g for g in range(inst.m) if items & (1 << g)]
    n = inst.n
    while remaining:
        k = len(remaining)
        size = max(n, k)
        matrix = []
        for a in range(n):
            base_val = inst.value(a, bundles[a])
            row = [
                inst.value(a, bundles[a] | (1 << g)) - base_val for g in remaining
            ]
            row.extend([F0] * (size - k))
            matrix.append(row)
        for _ in range(size - n):
            matrix.append([F0] * size)
        perm, _ = max_weight_assignment(matrix)
        taken = []
        for a in range(n):
            c = perm[a]
            if c < k:
                bundles[a] |= 1 << remaining[c]
                taken.append(remaining[c])
        remaining = [g for g in remaining if g not in taken]
    return Allocation(tuple(bundles))
