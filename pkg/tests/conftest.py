"""Shared helpers: tiny instance builders and brute-force reference oracles."""
from __future__ import annotations

from fractions import Fraction
from itertools import permutations

import pytest

from fairtransfers.model import (
    AdditiveValuation,
    Instance,
    TableValuation,
    validate_instance,
)

F0 = Fraction(0)


def additive_instance(rows, klass="additive", validate=True):
    """Instance from per-agent lists of item values (ints, strs, Fractions)."""
    vals = tuple(AdditiveValuation(tuple(Fraction(v) for v in row)) for row in rows)
    inst = Instance(len(rows), len(rows[0]) if rows else 0, vals, klass)
    return validate_instance(inst) if validate else inst


def table_instance(tables, klass="monotone", validate=True):
    vals = tuple(TableValuation(tuple(Fraction(v) for v in t)) for t in tables)
    m = (len(tables[0]) - 1).bit_length()
    inst = Instance(len(tables), m, vals, klass)
    return validate_instance(inst) if validate else inst


def longest_path_by_enumeration(w, n, start):
    """Max total weight over simple paths from ``start`` (empty path allowed)."""
    best = F0

    def walk(u, seen, total):
        nonlocal best
        if total > best:
            best = total
        for v in range(n):
            if v != u and v not in seen:
                walk(v, seen | {v}, total + w[u][v])

    walk(start, {start}, F0)
    return best


def best_assignment_by_enumeration(weights):
    """Reference for the Hungarian solver: full permutation scan."""
    n = len(weights)
    best = None
    best_perm = None
    for perm in permutations(range(n)):
        total = sum((weights[i][perm[i]] for i in range(n)), F0)
        if best is None or total > best or (total == best and perm < best_perm):
            best = total
            best_perm = perm
    return best_perm, best


@pytest.fixture
def example_low_nsw():
    """Two agents, two items; only two envy-freeable allocations."""
    from fairtransfers.oracles import gen_bad_nsw

    return gen_bad_nsw(Fraction(1, 100))
