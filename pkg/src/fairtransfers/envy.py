"""Envy graphs, envy-freeability, minimum subsidies, and natural transfers.

The envy graph of an allocation is the complete digraph on agents with arc
weight w(i,j) = v_i(A_j) - v_i(A_i).  An allocation admits envy-removing
payments exactly when this graph has no positive-weight directed cycle; the
minimum subsidies are the longest-path weights l(i).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ._num import Num, sign
from .model import (
    Allocation,
    Instance,
    InstanceFormatError,
    NotEnvyFreeableError,
    PaymentVector,
    check_partition,
    mask_items,
)

F0 = Fraction(0)


@dataclass(frozen=True)
class EnvyGraph:
    n: int
    w: tuple  # n x n matrix, w[i][j] = v_i(A_j) - v_i(A_i)
    allocation: Allocation


@dataclass(frozen=True)
class FreeabilityCertificate:
    """Verdict plus either a positive cycle (false) or the l(.) vector (true)."""

    verdict: bool
    cycle: Optional[tuple] = None
    cycle_weight: Optional[Num] = None
    potentials: Optional[tuple] = None


@dataclass(frozen=True)
class EnvyCheck:
    ok: bool
    worst_pair: Optional[tuple]
    violation: Num


def build_envy_graph(inst: Instance, alloc: Allocation) -> EnvyGraph:
    check_partition(inst, alloc)
    own = [inst.value(i, alloc.bundles[i]) for i in range(inst.n)]
    rows = []
    for i in range(inst.n):
        row = []
        for j in range(inst.n):
            row.append(F0 if i == j else inst.value(i, alloc.bundles[j]) - own[i])
        rows.append(tuple(row))
    return EnvyGraph(inst.n, tuple(rows), alloc)


def _find_positive_cycle_exhaustive(w, n):
    """DFS over simple cycles; fallback when pointer walking fails."""
    best = None

    def extend(path, seen, weight):
        nonlocal best
        if best is not None:
            return
        u = path[-1]
        for v2 in range(n):
            if v2 == u:
                continue
            if v2 == path[0] and len(path) >= 2:
                total = weight + w[u][v2]
                if sign(total) > 0:
                    best = (tuple(path), total)
                    return
            if v2 not in seen:
                seen.add(v2)
                path.append(v2)
                extend(path, seen, weight + w[u][v2])
                path.pop()
                seen.discard(v2)

    for start in range(n):
        if best is None:
            extend([start], {start}, F0)
    return best


def _longest_paths(w, n):
    """Exact Bellman-Ford-style relaxation, maximizing.

    Returns (potentials, None) when the graph has no positive cycle, else
    (None, (cycle, weight)) with a simple positive-weight cycle.
    """
    level = [F0] * n
    succ = [None] * n
    changed = True
    rounds = 0
    while changed and rounds <= n:
        changed = False
        rounds += 1
        new = list(level)
        for i in range(n):
            wi = w[i]
            for j in range(n):
                if i == j:
                    continue
                cand = wi[j] + level[j]
                if sign(cand - new[i]) > 0:
                    new[i] = cand
                    succ[i] = j
                    changed = True
        level = new
    if not changed:
        return level, None
    # An n-th improving round means some positive cycle; walk successor
    # pointers far enough to land on it.
    u = next(i for i in range(n) if succ[i] is not None)
    for _ in range(n):
        u = succ[u]
    seen = {}
    order = []
    while u not in seen:
        seen[u] = len(order)
        order.append(u)
        u = succ[u]
    cycle = order[seen[u]:]
    weight = F0
    for k, a in enumerate(cycle):
        weight += w[a][cycle[(k + 1) % len(cycle)]]
    if sign(weight) <= 0:
        found = _find_positive_cycle_exhaustive(w, n)
        if found is None:  # pragma: no cover - relaxation said otherwise
            raise AssertionError("relaxation detected a cycle that does not exist")
        cycle, weight = found
        cycle = list(cycle)
    # deterministic representation: start at the lowest agent index
    k = cycle.index(min(cycle))
    cycle = tuple(cycle[k:] + cycle[:k])
    return None, (cycle, weight)


def is_envy_freeable(inst: Instance, alloc: Allocation) -> FreeabilityCertificate:
    """Decide envy-freeability via exact longest-path relaxation."""
    graph = build_envy_graph(inst, alloc)
    level, bad = _longest_paths(graph.w, graph.n)
    if bad is None:
        return FreeabilityCertificate(verdict=True, potentials=tuple(level))
    cycle, weight = bad
    return FreeabilityCertificate(verdict=False, cycle=cycle, cycle_weight=weight)


def is_envy_freeable_by_permutation(inst: Instance, alloc: Allocation) -> bool:
    """Independent oracle: no bundle permutation improves utilitarian welfare."""
    if inst.n > 10:
        raise InstanceFormatError("permutation criterion capped at n <= 10")
    check_partition(inst, alloc)
    from itertools import permutations

    vals = [[inst.value(i, b) for b in alloc.bundles] for i in range(inst.n)]
    base = sum((vals[i][i] for i in range(inst.n)), F0)
    for perm in permutations(range(inst.n)):
        total = sum((vals[i][perm[i]] for i in range(inst.n)), F0)
        if sign(total - base) > 0:
            return False
    return True


def min_subsidies(inst: Instance, alloc: Allocation) -> PaymentVector:
    """Componentwise-minimal nonnegative payments making the allocation envy-free."""
    graph = build_envy_graph(inst, alloc)
    level, bad = _longest_paths(graph.w, graph.n)
    if bad is not None:
        cycle, weight = bad
        raise NotEnvyFreeableError(
            f"allocation is not envy-freeable: cycle {cycle} has weight {weight}",
            cycle=cycle,
            weight=weight,
        )
    return PaymentVector(tuple(level), "subsidy")


def natural_transfers(subsidies: PaymentVector) -> PaymentVector:
    """Center subsidies to sum zero: t_i = s_i - mean(s)."""
    if subsidies.kind != "subsidy":
        raise InstanceFormatError("natural transfers are derived from subsidies")
    n = len(subsidies.payments)
    mean = sum(subsidies.payments, F0) / n
    return PaymentVector(tuple(p - mean for p in subsidies.payments), "transfer")


def is_envy_free(inst: Instance, alloc: Allocation, payments: Optional[PaymentVector] = None) -> EnvyCheck:
    """Check all n(n-1) inequalities v_i(A_i)+p_i >= v_i(A_j)+p_j exactly."""
    check_partition(inst, alloc)
    pays = payments.payments if payments is not None else (F0,) * inst.n
    if len(pays) != inst.n:
        raise InstanceFormatError("payment vector length differs from agent count")
    worst = F0
    worst_pair = None
    for i in range(inst.n):
        own = inst.value(i, alloc.bundles[i]) + pays[i]
        for j in range(inst.n):
            if i == j:
                continue
            gap = inst.value(i, alloc.bundles[j]) + pays[j] - own
            if sign(gap - worst) > 0:
                worst = gap
                worst_pair = (i, j)
    return EnvyCheck(ok=worst_pair is None, worst_pair=worst_pair, violation=worst)


def is_ef1(inst: Instance, alloc: Allocation) -> bool:
    """Envy-free up to one good: some single removal kills each envy."""
    check_partition(inst, alloc)
    for i in range(inst.n):
        own = inst.value(i, alloc.bundles[i])
        for j in range(inst.n):
            if i == j:
                continue
            bj = alloc.bundles[j]
            if sign(inst.value(i, bj) - own) <= 0:
                continue
            if bj == 0:
                return False  # empty bundle cannot lose a good
            if not any(
                sign(inst.value(i, bj ^ (1 << g)) - own) <= 0 for g in mask_items(bj)
            ):
                return False
    return True


def bounded_envy(inst: Instance, alloc: Allocation) -> Num:
    """Smallest b >= 0 such that every pairwise envy is at most b."""
    graph = build_envy_graph(inst, alloc)
    worst = F0
    for i in range(inst.n):
        for j in range(inst.n):
            if i != j and sign(graph.w[i][j] - worst) > 0:
                worst = graph.w[i][j]
    return worst
