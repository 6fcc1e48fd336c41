"""Brute-force ground truth and generators for the paper-style instance families.

Enumeration is lexicographic by assignment string (item 0 varies slowest), so
argmax tie-breaks are reproducible and chunked scans merge deterministically.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iter_product
from typing import Iterator, Optional, Sequence

from ._lp import solve_lp, solve_linear_system
from ._num import Num, as_fraction, is_rational, sign, sqrt_int
from .envy import EnvyGraph, build_envy_graph, is_envy_freeable
from .model import (
    AdditiveValuation,
    Allocation,
    Instance,
    InstanceFormatError,
    NotEnvyFreeableError,
    PaymentVector,
    SqrtCardinalityValuation,
    TableValuation,
    TooLargeError,
    social_welfare,
    validate_instance,
)

F0 = Fraction(0)
F1 = Fraction(1)

ENUM_CAP = 10**7
COMPOSITION_CAP = 10**6
ARGMAX_COMBO_CAP = 10**6


def _check_enum_cap(inst: Instance):
    if inst.n**inst.m > ENUM_CAP:
        raise TooLargeError(
            f"{inst.n}^{inst.m} allocations exceed the enumeration cap {ENUM_CAP}"
        )


def iter_assignments(n: int, m: int, lo: int = 0, hi: Optional[int] = None):
    """Yield (index, masks) over assignments in lexicographic order.

    ``masks`` is mutated in place between yields; copy before storing.
    """
    total = n**m
    if hi is None or hi > total:
        hi = total
    if lo >= hi:
        return
    if m == 0:
        yield 0, [0] * n
        return
    digits = [0] * m
    rem = lo
    for pos in range(m - 1, -1, -1):
        digits[pos] = rem % n
        rem //= n
    masks = [0] * n
    for pos, a in enumerate(digits):
        masks[a] |= 1 << pos
    idx = lo
    while True:
        yield idx, masks
        idx += 1
        if idx >= hi:
            return
        pos = m - 1
        while True:
            a = digits[pos]
            masks[a] ^= 1 << pos
            a += 1
            if a < n:
                digits[pos] = a
                masks[a] |= 1 << pos
                break
            digits[pos] = 0
            masks[0] |= 1 << pos
            pos -= 1


def _value_arrays(inst: Instance):
    """Per-agent bundle values indexed by mask, scaled to ints when possible.

    Returns None when an oracle is symbolic or the table would not fit.
    """
    if inst.m > 20:
        return None
    dens = []
    for oracle in inst.valuations:
        if oracle.kind == "additive":
            dens.extend(v.denominator for v in oracle.item_values)
        elif oracle.kind == "table":
            dens.extend(v.denominator for v in oracle.entries)
        else:
            return None
    den = 1
    for d in dens:
        den = den * d // math.gcd(den, d)
        if den > 10**9:
            den = None
            break
    arrays = []
    size = 1 << inst.m
    for oracle in inst.valuations:
        if oracle.kind == "additive":
            items = [
                (int(v * den) if den else v) for v in oracle.item_values
            ]
            arr = [0 if den else F0] * size
            for mask in range(1, size):
                low = mask & -mask
                arr[mask] = arr[mask ^ low] + items[low.bit_length() - 1]
            arrays.append(arr)
        else:
            if den:
                arrays.append([int(v * den) for v in oracle.entries])
            else:
                arrays.append(list(oracle.entries))
    return arrays


def _scan_range_best(inst: Instance, task: str, lo: int, hi: int):
    """Best (key, index, bundles) over an assignment index range; None if empty."""
    n = inst.n
    arrays = _value_arrays(inst)
    best = None
    best_idx = None
    best_masks = None
    if arrays is not None:
        agents = range(n)
        for idx, masks in iter_assignments(n, inst.m, lo, hi):
            if task == "sw":
                v = sum(arrays[a][masks[a]] for a in agents)
            else:
                v = 1
                for a in agents:
                    v *= arrays[a][masks[a]]
            if best is None or v > best:
                best = v
                best_idx = idx
                best_masks = tuple(masks)
    else:
        for idx, masks in iter_assignments(n, inst.m, lo, hi):
            if task == "sw":
                v = sum((inst.value(a, masks[a]) for a in range(n)), F0)
            else:
                v = F1
                for a in range(n):
                    v = v * inst.value(a, masks[a])
            if best is None or sign(v - best) > 0:
                best = v
                best_idx = idx
                best_masks = tuple(masks)
    if best is None:
        return None
    return best, best_idx, best_masks


def _chunk_ranges(total: int, chunks: int):
    chunks = max(1, min(chunks, total)) if total else 1
    step = -(-total // chunks)
    out = []
    lo = 0
    while lo < total:
        out.append((lo, min(lo + step, total)))
        lo += step
    return out or [(0, 0)]


def _scan_best(inst: Instance, task: str, workers: int = 1) -> Allocation:
    _check_enum_cap(inst)
    total = inst.n**inst.m
    if workers <= 1:
        found = _scan_range_best(inst, task, 0, total)
    else:
        results = _run_chunks(
            _scan_chunk_worker,
            [(inst, task, lo, hi) for lo, hi in _chunk_ranges(total, workers)],
            workers,
        )
        found = None
        for res in results:
            if res is None:
                continue
            if found is None:
                found = res
                continue
            cmp = res[0] - found[0]
            c = cmp if isinstance(cmp, int) else sign(cmp)
            if c > 0 or (c == 0 and res[1] < found[1]):
                found = res
    assert found is not None
    return Allocation(found[2])


def _scan_chunk_worker(args):
    inst, task, lo, hi = args
    return _scan_range_best(inst, task, lo, hi)


def _efable_chunk_worker(args):
    inst, lo, hi = args
    out = []
    for _, masks in iter_assignments(inst.n, inst.m, lo, hi):
        alloc = Allocation(tuple(masks))
        if is_envy_freeable(inst, alloc).verdict:
            out.append(alloc)
    return out


def _run_chunks(fn, payloads, workers):
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))


# ---------------------------------------------------------------------------
# cardinality-symmetric fast path (covers the sqrt-of-cardinality family)


def _cardinality_value(oracle, k: int) -> Num:
    if oracle.kind == "sqrt_cardinality":
        return sqrt_int(k)
    return oracle.item_values[0] * k if k else F0


def _cardinality_only(inst: Instance) -> bool:
    for oracle in inst.valuations:
        if oracle.kind == "sqrt_cardinality":
            continue
        if oracle.kind == "additive" and len(set(oracle.item_values)) <= 1:
            continue
        return False
    return True


def _compositions_desc(m: int, n: int):
    if n == 1:
        yield (m,)
        return
    for k in range(m, -1, -1):
        for rest in _compositions_desc(m - k, n - 1):
            yield (k,) + rest


def _cardinality_opt(inst: Instance, task: str) -> Allocation:
    if math.comb(inst.m + inst.n - 1, inst.n - 1) > COMPOSITION_CAP:
        raise TooLargeError("too many bundle-size splits to enumerate")
    best = None
    best_sizes = None
    for sizes in _compositions_desc(inst.m, inst.n):
        if task == "sw":
            v = sum(
                (_cardinality_value(o, k) for o, k in zip(inst.valuations, sizes)), F0
            )
        else:
            v = F1
            for o, k in zip(inst.valuations, sizes):
                v = v * _cardinality_value(o, k)
        if best is None or sign(v - best) > 0:
            best = v
            best_sizes = sizes
    bundles = []
    start = 0
    for k in best_sizes:
        bundles.append(((1 << k) - 1) << start if k else 0)
        start += k
    return Allocation(tuple(bundles))


# ---------------------------------------------------------------------------
# optimal allocations


def brute_sw_opt(inst: Instance, workers: int = 1) -> Allocation:
    """Exact utilitarian-welfare maximizer (lexicographic tie-break).

    Additive instances use the per-item argmax closed form; everything else
    enumerates within the cap.
    """
    if all(o.kind == "additive" for o in inst.valuations):
        bundles = [0] * inst.n
        for g in range(inst.m):
            best_agent = 0
            best_val = inst.valuations[0].item_values[g]
            for a in range(1, inst.n):
                v = inst.valuations[a].item_values[g]
                if v > best_val:
                    best_val = v
                    best_agent = a
            bundles[best_agent] |= 1 << g
        return Allocation(tuple(bundles))
    if _cardinality_only(inst):
        return _cardinality_opt(inst, "sw")
    return _scan_best(inst, "sw", workers)


def brute_nsw_opt(inst: Instance, workers: int = 1) -> Allocation:
    """Exact Nash-product maximizer (lexicographic tie-break)."""
    if _cardinality_only(inst):
        return _cardinality_opt(inst, "nsw")
    return _scan_best(inst, "nsw", workers)


def brute_rho_opt(inst: Instance, rho: Fraction) -> Allocation:
    """Allocation maximizing the rho-mean of raw values, rho in (0, 1).

    The power mean of a non-unit exponent is irrational in general, so this
    oracle compares double-precision evaluations; ties keep the
    lexicographically first allocation.
    """
    rho = Fraction(rho)
    if not F0 < rho < F1:
        raise InstanceFormatError("brute_rho_opt expects rho strictly inside (0, 1)")
    _check_enum_cap(inst)
    r = float(rho)
    best = None
    best_masks = None
    for _, masks in iter_assignments(inst.n, inst.m):
        acc = 0.0
        for a in range(inst.n):
            acc += float(inst.value(a, masks[a])) ** r
        if best is None or acc > best:
            best = acc
            best_masks = tuple(masks)
    return Allocation(best_masks)


def enumerate_envy_freeable(inst: Instance) -> Iterator[Allocation]:
    """All envy-freeable allocations, lexicographic by assignment string."""
    _check_enum_cap(inst)
    for _, masks in iter_assignments(inst.n, inst.m):
        alloc = Allocation(tuple(masks))
        if is_envy_freeable(inst, alloc).verdict:
            yield alloc


def enumerate_envy_freeable_parallel(inst: Instance, workers: int):
    """Chunked variant with the same output order regardless of worker count."""
    _check_enum_cap(inst)
    total = inst.n**inst.m
    payloads = [(inst, lo, hi) for lo, hi in _chunk_ranges(total, workers)]
    out = []
    for part in _run_chunks(_efable_chunk_worker, payloads, workers):
        out.extend(part)
    return out


# ---------------------------------------------------------------------------
# minimum total transfer


@dataclass(frozen=True)
class TransferLP:
    """min sum |t_i| subject to t_i - t_j >= w(i,j) for all i != j, sum t = 0."""

    graph: EnvyGraph

    def feasible(self) -> bool:
        cert = is_envy_freeable_graph(self.graph)
        return cert is None

    def solve(self):
        n = self.graph.n
        w = self.graph.w
        if n == 1:
            return PaymentVector((F0,), "transfer"), F0
        if n == 2:
            lo = w[1][0] / 2
            hi = -w[0][1] / 2
            if sign(lo - hi) > 0:
                raise NotEnvyFreeableError(
                    "transfer LP infeasible", cycle=(0, 1), weight=w[0][1] + w[1][0]
                )
            if sign(lo) <= 0 <= sign(hi):
                t1 = F0
            elif sign(lo) > 0:
                t1 = lo
            else:
                t1 = hi
            t = (-t1, t1)
            total = (t1 if sign(t1) >= 0 else -t1) * 2
            return PaymentVector(t, "transfer"), total
        if not all(is_rational(w[i][j]) for i in range(n) for j in range(n)):
            raise InstanceFormatError(
                "exact transfer LP with irrational envy weights is only supported for n = 2"
            )
        # variables: t_i = a_i - b_i with a, b >= 0
        nv = 2 * n
        a_ub = []
        b_ub = []
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                row = [F0] * nv
                row[i] = -F1
                row[n + i] = F1
                row[j] = F1
                row[n + j] = -F1
                a_ub.append(row)
                b_ub.append(-w[i][j])
        a_eq = [[F1] * n + [-F1] * n]
        b_eq = [F0]
        c = [F1] * nv
        res = solve_lp(c, a_ub, b_ub, a_eq, b_eq)
        if res is None:
            cert = is_envy_freeable_graph(self.graph)
            raise NotEnvyFreeableError(
                "transfer LP infeasible",
                cycle=cert[0] if cert else None,
                weight=cert[1] if cert else None,
            )
        x, _ = res
        t = tuple(x[i] - x[n + i] for i in range(n))
        total = sum((abs(ti) for ti in t), F0)
        return PaymentVector(t, "transfer"), total


def is_envy_freeable_graph(graph: EnvyGraph):
    """Positive cycle of the graph, or None when none exists."""
    from .envy import _longest_paths

    _, bad = _longest_paths(graph.w, graph.n)
    return bad


def min_total_transfer(inst: Instance, alloc: Allocation):
    """Exact minimizer of total transfer for one envy-freeable allocation."""
    graph = build_envy_graph(inst, alloc)
    bad = is_envy_freeable_graph(graph)
    if bad is not None:
        raise NotEnvyFreeableError(
            f"allocation is not envy-freeable: cycle {bad[0]} has weight {bad[1]}",
            cycle=bad[0],
            weight=bad[1],
        )
    return TransferLP(graph).solve()


def min_total_transfer_vertex(inst: Instance, alloc: Allocation) -> Num:
    """Cross-check: enumerate basic points of the constraint arrangement.

    Tractable for n <= 4; used by the test-suite to guard the simplex.
    """
    graph = build_envy_graph(inst, alloc)
    if is_envy_freeable_graph(graph) is not None:
        raise NotEnvyFreeableError("not envy-freeable", cycle=None, weight=None)
    n = graph.n
    w = graph.w
    if n == 1:
        return F0
    planes = []
    for i in range(n):
        for j in range(n):
            if i != j:
                row = [F0] * n
                row[i] = F1
                row[j] = -F1
                planes.append((row, w[i][j]))
    for i in range(n):
        row = [F0] * n
        row[i] = F1
        planes.append((row, F0))
    from itertools import combinations

    best = None
    zero_sum = ([F1] * n, F0)
    for chosen in combinations(planes, n - 1):
        a = [zero_sum[0]] + [p[0] for p in chosen]
        b = [zero_sum[1]] + [p[1] for p in chosen]
        t = solve_linear_system(a, b)
        if t is None:
            continue
        ok = True
        for i in range(n):
            for j in range(n):
                if i != j and sign(t[i] - t[j] - w[i][j]) < 0:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        total = sum((abs(ti) for ti in t), F0)
        if best is None or sign(total - best) < 0:
            best = total
    assert best is not None
    return best


def min_transfer_at_welfare(
    inst: Instance, alpha: Fraction, welfare: str = "sw"
) -> Optional[Num]:
    """min over envy-freeable allocations with welfare ratio >= alpha of the
    minimum total transfer; None when no allocation qualifies."""
    alpha = Fraction(alpha)
    if welfare not in ("sw", "nsw"):
        raise InstanceFormatError("welfare must be 'sw' or 'nsw'")
    best = None

    def consider(alloc: Allocation):
        nonlocal best
        if not is_envy_freeable(inst, alloc).verdict:
            return
        _, total = min_total_transfer(inst, alloc)
        if best is None or sign(total - best) < 0:
            best = total

    if welfare == "sw" and alpha == 1 and all(o.kind == "additive" for o in inst.valuations):
        # ratio 1 forces per-item argmax choices; enumerate only those
        choice_sets = []
        combos = 1
        for g in range(inst.m):
            vals = [o.item_values[g] for o in inst.valuations]
            top = max(vals)
            agents = [a for a, v in enumerate(vals) if v == top]
            choice_sets.append(agents)
            combos *= len(agents)
            if combos > ARGMAX_COMBO_CAP:
                raise TooLargeError("too many welfare-optimal allocations to scan")
        for combo in iter_product(*choice_sets) if inst.m else [()]:
            masks = [0] * inst.n
            for g, a in enumerate(combo):
                masks[a] |= 1 << g
            consider(Allocation(tuple(masks)))
        return best

    _check_enum_cap(inst)
    if welfare == "sw":
        opt = social_welfare(inst, brute_sw_opt(inst))
        threshold = alpha * opt
        for _, masks in iter_assignments(inst.n, inst.m):
            val = sum((inst.value(a, masks[a]) for a in range(inst.n)), F0)
            if sign(val - threshold) >= 0:
                consider(Allocation(tuple(masks)))
    else:
        opt_alloc = brute_nsw_opt(inst)
        opt = F1
        for a in range(inst.n):
            opt = opt * inst.value(a, opt_alloc.bundles[a])
        threshold = alpha**inst.n * opt
        for _, masks in iter_assignments(inst.n, inst.m):
            val = F1
            for a in range(inst.n):
                val = val * inst.value(a, masks[a])
            if sign(val - threshold) >= 0:
                consider(Allocation(tuple(masks)))
    return best


# ---------------------------------------------------------------------------
# instance generators


def gen_bad_nsw(eps: Fraction) -> Instance:
    """Two agents, two items; no envy-freeable allocation has decent NSW."""
    eps = Fraction(eps)
    if not F0 < eps < F1:
        raise InstanceFormatError("eps must lie in (0, 1)")
    vals = (
        AdditiveValuation((F1, Fraction(1, 2))),
        AdditiveValuation((Fraction(1, 2), eps)),
    )
    return validate_instance(Instance(2, 2, vals, "additive"))


def gen_tightness(n: int) -> Instance:
    """n agents, n items, identity valuations; the 1/n welfare floor is tight."""
    if n < 1:
        raise InstanceFormatError("need n >= 1")
    vals = tuple(
        AdditiveValuation(tuple(F1 if g == i else F0 for g in range(n))) for i in range(n)
    )
    return validate_instance(Instance(n, n, vals, "additive"))


def gen_imposs(n: int, m: int, eps: Fraction) -> Instance:
    """One agent values every item at 1, the rest at eps; low-envy is low-welfare."""
    eps = Fraction(eps)
    if not F0 < eps < F1:
        raise InstanceFormatError("eps must lie in (0, 1)")
    if n < 2 or m < 1:
        raise InstanceFormatError("need n >= 2 and m >= 1")
    vals = tuple(
        AdditiveValuation(tuple((F1 if i == n - 1 else eps) for _ in range(m)))
        for i in range(n)
    )
    return validate_instance(Instance(n, m, vals, "additive"))


def gen_constant_sum(n: int, m: int) -> Instance:
    """Block/uniform constant-sum construction: sqrt(n) high agents, rest low."""
    r = math.isqrt(n)
    if r * r != n:
        raise InstanceFormatError("sqrt(n) must be integral")
    if m % r != 0:
        raise InstanceFormatError("m must be divisible by sqrt(n)")
    block = m // r
    vals = []
    for i in range(r):
        row = [F0] * m
        for g in range(i * block, (i + 1) * block):
            row[g] = F1
        vals.append(AdditiveValuation(tuple(row)))
    low = Fraction(1, r)
    for _ in range(n - r):
        vals.append(AdditiveValuation((low,) * m))
    return validate_instance(Instance(n, m, tuple(vals), "additive"))


def gen_sqrt(m: int) -> Instance:
    """Two agents: linear count vs sqrt of count; reassignment needs big transfers."""
    if m < 1:
        raise InstanceFormatError("need m >= 1")
    vals = (AdditiveValuation((F1,) * m), SqrtCardinalityValuation())
    return validate_instance(Instance(2, m, vals, "subadditive"))


def _random_additive_row(rng, m):
    return tuple(Fraction(rng.randint(0, 64), 64) for _ in range(m))


def _monotone_closure_table(rng, m):
    size = 1 << m
    raw = [Fraction(rng.randint(0, 64), 64) for _ in range(size)]
    raw[0] = F0
    table = [F0] * size
    for mask in range(1, size):
        best = raw[mask]
        sub = mask
        while sub:
            low = sub & -sub
            prev = table[mask ^ low]
            if prev > best:
                best = prev
            sub ^= low
        table[mask] = best
    # scale so the max marginal is exactly 1
    mu = F0
    for s in range(size):
        for g in range(m):
            if s & (1 << g):
                continue
            marg = table[s | (1 << g)] - table[s]
            if marg > mu:
                mu = marg
    if mu > 0:
        table = [v / mu for v in table]
    return TableValuation(tuple(table))


def _budget_additive_table(rng, m):
    items = _random_additive_row(rng, m)
    total = sum(items, F0)
    top = max(items, default=F0)
    if rng.random() < 0.25 or total == top:
        cap = total  # plain additive row
    else:
        cap = top + Fraction(rng.randint(0, 64), 64) * (total - top)
    size = 1 << m
    table = [F0] * size
    for mask in range(1, size):
        low = mask & -mask
        table[mask] = table[mask ^ low] + items[low.bit_length() - 1]
    table = [min(v, cap) for v in table]
    return TableValuation(tuple(table))


def _partition_matroid_table(rng, m):
    nblocks = rng.randint(1, max(1, m))
    block_of = [rng.randrange(nblocks) for _ in range(m)]
    caps = [rng.randint(0, 3) for _ in range(nblocks)]
    size = 1 << m
    table = []
    for mask in range(size):
        counts = [0] * nblocks
        s = mask
        while s:
            low = s & -s
            counts[block_of[low.bit_length() - 1]] += 1
            s ^= low
        table.append(Fraction(sum(min(c, cap) for c, cap in zip(counts, caps))))
    return TableValuation(tuple(table))


def gen_random(n: int, m: int, klass: str, seed: int) -> Instance:
    """Seeded random instance of the requested valuation class."""
    if n < 1 or m < 0:
        raise InstanceFormatError("need n >= 1 and m >= 0")
    rng = random.Random(seed)
    if klass == "additive":
        vals = tuple(AdditiveValuation(_random_additive_row(rng, m)) for _ in range(n))
    elif klass == "monotone":
        if m > 12:
            raise TooLargeError("random monotone tables capped at m <= 12")
        vals = tuple(_monotone_closure_table(rng, m) for _ in range(n))
    elif klass == "subadditive":
        if m > 12:
            raise TooLargeError("random subadditive tables capped at m <= 12")
        vals = tuple(_budget_additive_table(rng, m) for _ in range(n))
    elif klass == "matroid_rank":
        if m > 12:
            raise TooLargeError("random matroid-rank tables capped at m <= 12")
        vals = tuple(_partition_matroid_table(rng, m) for _ in range(n))
    else:
        raise InstanceFormatError(f"unknown class {klass!r}")
    return validate_instance(Instance(n, m, vals, klass))
