"""End-to-end constructions: envy-free allocations with transfers plus exact
bound certificates.

Every operation returns a SolveResult whose (allocation, transfers) pair is
re-checked for envy-freeness before it leaves this module.  Certificates store
both sides of each proven bound; all of them are exact rationals except the
NSW-ratio checks, whose target involves the transcendental constant e^{-1/e}
and is therefore compared in double precision with a relative tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from ._num import Num, as_float, sign
from .envy import (
    bounded_envy,
    build_envy_graph,
    is_ef1,
    is_envy_free,
    min_subsidies,
    natural_transfers,
)
from .matching import iterated_matching, reassign_bundles
from .model import (
    Allocation,
    Instance,
    InstanceFormatError,
    InvariantViolation,
    PaymentVector,
    WelfareReport,
    check_partition,
    mask_items,
    social_welfare,
    welfare_report,
)
from .oracles import brute_nsw_opt, brute_sw_opt

F0 = Fraction(0)
F1 = Fraction(1)

#: e^{-1/e}, the NSW guarantee of reassigning optimal bundles (~0.6922)
NSW_GUARANTEE = math.exp(-1.0 / math.e)

#: relative tolerance for the irrational-threshold certificates
NSW_REL_TOL = 1e-9


@dataclass(frozen=True)
class Certificate:
    """One named bound check: ``lhs <op> rhs`` where the op is part of the name."""

    name: str
    lhs: object
    rhs: object
    holds: bool
    approx: bool = False


@dataclass(frozen=True)
class SolveResult:
    allocation: Allocation
    subsidies: PaymentVector
    transfers: PaymentVector
    report: WelfareReport
    certificates: tuple
    algorithm: str
    params: dict


def _cert_le(name, lhs, rhs) -> Certificate:
    return Certificate(name, lhs, rhs, holds=sign(rhs - lhs) >= 0)


def _cert_ge(name, lhs, rhs) -> Certificate:
    return Certificate(name, lhs, rhs, holds=sign(lhs - rhs) >= 0)


def _nsw_ratio_cert(name, prod_num, prod_den, n, threshold) -> Certificate:
    """(prod_num/prod_den)^(1/n) >= threshold, double precision.

    A zero reference product makes the bound vacuous; the ratio is reported
    as 1.0 in that case.
    """
    if sign(prod_den) == 0:
        return Certificate(name, 1.0, threshold, holds=True, approx=True)
    ratio = as_float(prod_num / prod_den) ** (1.0 / n)
    return Certificate(
        name, ratio, threshold, holds=ratio >= threshold * (1.0 - NSW_REL_TOL), approx=True
    )


def _nash_prod(inst, alloc, transfers=None) -> Num:
    prod = F1
    for i, b in enumerate(alloc.bundles):
        u = inst.value(i, b)
        if transfers is not None:
            u = u + transfers.payments[i]
        prod = prod * u
    return prod


def _settle(inst, alloc):
    """Minimum subsidies, natural transfers, and a mandatory envy-free check."""
    subs = min_subsidies(inst, alloc)
    transfers = natural_transfers(subs)
    check = is_envy_free(inst, alloc, transfers)
    if not check.ok:  # pragma: no cover - would contradict the characterization
        raise AssertionError(f"settled allocation still envious: {check}")
    return subs, transfers


def _result(inst, alloc, algorithm, params, certs, rho=None) -> SolveResult:
    subs, transfers = _settle(inst, alloc)
    report = welfare_report(inst, alloc, transfers, rho)
    full_certs = tuple(certs(alloc, transfers)) if callable(certs) else tuple(certs)
    return SolveResult(
        allocation=alloc,
        subsidies=subs,
        transfers=transfers,
        report=report,
        certificates=full_certs,
        algorithm=algorithm,
        params=params,
    )


# ---------------------------------------------------------------------------
# bounded-envy pipeline


def _worst_envy_pair(inst, alloc):
    graph = build_envy_graph(inst, alloc)
    worst = F0
    pair = None
    for i in range(inst.n):
        for j in range(inst.n):
            if i != j and sign(graph.w[i][j] - worst) > 0:
                worst = graph.w[i][j]
                pair = (i, j)
    return worst, pair


def make_envy_free_from_bounded(inst: Instance, start: Allocation, bound) -> SolveResult:
    """Turn a b-bounded-envy allocation into an envy-free one with transfers.

    Reassigns bundles to maximize utilitarian welfare, then settles with
    natural transfers; the total transfer is certified against 2*b*n^2 and the
    per-agent subsidies against 2*b*(n-1).
    """
    actual, pair = _worst_envy_pair(inst, start)
    if sign(actual - bound) > 0:
        raise InvariantViolation(
            f"start allocation has envy {actual} > bound {bound}", witness=pair
        )
    alloc, _ = reassign_bundles(inst, start)
    params = {"b": bound, "start": start.bundles}

    def certs(alloc, transfers):
        return certificates_for(inst, alloc, transfers, "bounded", params)

    return _result(inst, alloc, "bounded", params, certs)


# ---------------------------------------------------------------------------
# envy-cycles procedure


def _strict_envy_edges(inst, bundles):
    own = [inst.value(i, b) for i, b in enumerate(bundles)]
    edges = []
    for i in range(inst.n):
        row = []
        for j in range(inst.n):
            if i != j and sign(inst.value(i, bundles[j]) - own[i]) > 0:
                row.append(j)
        edges.append(row)
    return edges


def envy_cycles(inst: Instance, items: int, start: Allocation) -> Allocation:
    """Add items one at a time to an agent nobody strictly envies.

    Among the unenvied agents the item goes to one of minimum own-bundle
    value (ties: lowest index).  When no unenvied agent exists, bundles rotate
    along a strict-envy cycle (each agent takes the bundle it envies), which
    strictly raises the sum of own values, so the procedure terminates.  The
    result's worst envy exceeds the start's by at most 1 (items have marginal
    value at most 1).
    """
    held = 0
    for b in start.bundles:
        held |= b
    if held & items:
        raise InstanceFormatError("items to allocate overlap the start allocation")
    start_envy = bounded_envy_partial(inst, start.bundles)
    bundles = list(start.bundles)
    for g in sorted(mask_items(items)):
        while True:
            edges = _strict_envy_edges(inst, bundles)
            envied = set()
            for i, row in enumerate(edges):
                envied.update(row)
            sources = [j for j in range(inst.n) if j not in envied]
            if sources:
                pick = sources[0]
                pick_val = inst.value(pick, bundles[pick])
                for j in sources[1:]:
                    v = inst.value(j, bundles[j])
                    if sign(v - pick_val) < 0:
                        pick, pick_val = j, v
                bundles[pick] |= 1 << g
                break
            # every agent is envied: walk lowest-index predecessors to a cycle
            pred = {}
            for j in range(inst.n):
                pred[j] = min(i for i in range(inst.n) if j in edges[i])
            seen = {}
            order = []
            u = 0
            while u not in seen:
                seen[u] = len(order)
                order.append(u)
                u = pred[u]
            cycle = order[seen[u]:]  # pred-direction: cycle[k] envied by cycle[k+1]
            k = cycle.index(min(cycle))
            cycle = cycle[k:] + cycle[:k]
            old = list(bundles)
            for idx, agent in enumerate(cycle):
                envier = cycle[(idx + 1) % len(cycle)]
                bundles[envier] = old[agent]
    result = Allocation(tuple(bundles))
    final_envy = bounded_envy_partial(inst, bundles)
    if sign(final_envy - start_envy - F1) > 0:  # pragma: no cover
        raise AssertionError("envy-cycles grew envy by more than one")
    return result


def bounded_envy_partial(inst, bundles) -> Num:
    """Worst pairwise envy for bundles that need not cover all items."""
    worst = F0
    own = [inst.value(i, b) for i, b in enumerate(bundles)]
    for i in range(inst.n):
        for j in range(inst.n):
            if i == j:
                continue
            gap = inst.value(i, bundles[j]) - own[i]
            if sign(gap - worst) > 0:
                worst = gap
    return worst


# ---------------------------------------------------------------------------
# NSW constructions


def nsw_reassign(inst: Instance, base: Allocation) -> SolveResult:
    """Reassign the base's bundles for welfare, then settle with transfers.

    The Nash product after transfers retains at least an (e^{-1/e})^n fraction
    of the base allocation's Nash product.
    """
    check_partition(inst, base)
    alloc, _ = reassign_bundles(inst, base)
    params = {"base": base.bundles}

    def certs(alloc, transfers):
        return certificates_for(inst, alloc, transfers, "nsw-reassign", params)

    return _result(inst, alloc, "nsw-reassign", params, certs)


def nsw_pipeline_additive(
    inst: Instance,
    ef1_nsw_input: Optional[Allocation] = None,
    alpha: Fraction = F1,
) -> SolveResult:
    """Envy-free transfers with high NSW for additive valuations.

    Default path: start from the exact Nash-product maximizer (EF1 for
    additive valuations) and reassign.  When an externally computed EF1
    allocation with an alpha NSW guarantee is plugged in, the certified ratio
    carries the extra 1/2 conversion loss.
    """
    if inst.declared_class != "additive":
        raise InstanceFormatError("nsw pipeline requires an additive instance")
    alpha = Fraction(alpha)
    if not F0 < alpha <= F1:
        raise InstanceFormatError("alpha must lie in (0, 1]")
    if ef1_nsw_input is not None:
        if not is_ef1(inst, ef1_nsw_input):
            raise InvariantViolation("supplied allocation is not EF1")
        base = ef1_nsw_input
        converted = True
    else:
        base = brute_nsw_opt(inst)
        if not is_ef1(inst, base):  # pragma: no cover - contradicts EF1 theorem
            raise AssertionError(
                "Nash-optimal allocation is not EF1 on an additive instance"
            )
        converted = False
    alloc, _ = reassign_bundles(inst, base)
    params = {"alpha": alpha, "converted": converted}

    def certs(alloc, transfers):
        return certificates_for(inst, alloc, transfers, "nsw", params)

    return _result(inst, alloc, "nsw", params, certs)


def nsw_pipeline_matroid(inst: Instance) -> SolveResult:
    """Envy-free transfers with high NSW for verified matroid-rank valuations."""
    if inst.declared_class != "matroid_rank":
        raise InstanceFormatError("pipeline requires a matroid_rank instance")
    if not inst.class_verified:
        raise InstanceFormatError("matroid_rank class must be verified on load")
    base = brute_nsw_opt(inst)
    if not is_ef1(inst, base):
        raise InvariantViolation(
            "Nash-optimal allocation is not EF1 on a matroid-rank instance; "
            "this contradicts the cited characterization",
            witness=base.bundles,
        )
    alloc, _ = reassign_bundles(inst, base)
    params = {}

    def certs(alloc, transfers):
        return certificates_for(inst, alloc, transfers, "nsw-matroid", params)

    return _result(inst, alloc, "nsw-matroid", params, certs)


# ---------------------------------------------------------------------------
# utilitarian welfare targets


def welfare_target_additive(inst: Instance, alpha) -> SolveResult:
    """Social-welfare target alpha with per-agent-bounded transfers (additive).

    Keeps a minimal high-value slice of each agent's optimal bundle, hands the
    rest to rounds of maximum-weight matching, and settles with natural
    transfers.
    """
    if inst.declared_class != "additive" or any(
        o.kind != "additive" for o in inst.valuations
    ):
        raise InstanceFormatError("this construction requires additive valuations")
    alpha = Fraction(alpha)
    if not F0 < alpha <= F1:
        raise InstanceFormatError("alpha must lie in (0, 1]")
    opt = brute_sw_opt(inst)
    kept = []
    for i in range(inst.n):
        target = alpha * inst.value(i, opt.bundles[i])
        items = sorted(
            mask_items(opt.bundles[i]),
            key=lambda g: (-inst.valuations[i].item_values[g], g),
        )
        mask = 0
        total = F0
        for g in items:
            if sign(total - target) >= 0:
                break
            mask |= 1 << g
            total += inst.valuations[i].item_values[g]
        kept.append(mask)
    kept_union = 0
    for mask in kept:
        kept_union |= mask
    leftover = inst.full_mask & ~kept_union
    alloc = iterated_matching(inst, leftover, Allocation(tuple(kept)))
    params = {"alpha": alpha}

    def certs(alloc, transfers):
        return certificates_for(inst, alloc, transfers, "alg1", params)

    return _result(inst, alloc, "alg1", params, certs)


def _candidate_enumerate(inst, avail_per_agent, empty_agents, threshold):
    """Minimum-size candidate slice (ties: lowest bitmask) meeting the threshold."""
    best = None
    for avail in set(avail_per_agent):
        sub = avail
        while True:
            ok = any(
                sign(inst.value(j, sub) - threshold) >= 0 for j in empty_agents
            )
            if ok:
                key = (sub.bit_count(), sub)
                if best is None or key < best:
                    best = key
            if sub == 0:
                break
            sub = (sub - 1) & avail
    return None if best is None else best[1]


def _candidate_greedy_additive(inst, avail_per_agent, empty_agents, threshold):
    """Greedy shortcut for additive valuations: top items first per recipient."""
    best = None
    for avail in set(avail_per_agent):
        for j in empty_agents:
            vals = inst.valuations[j].item_values
            items = sorted(mask_items(avail), key=lambda g: (-vals[g], g))
            mask = 0
            total = F0
            for g in items:
                if sign(total - threshold) >= 0:
                    break
                mask |= 1 << g
                total += vals[g]
            if sign(total - threshold) >= 0 or sign(threshold) <= 0:
                key = (mask.bit_count(), mask)
                if best is None or key < best:
                    best = key
    return None if best is None else best[1]


def welfare_target_general(inst: Instance, alpha, method: str = "enumerate") -> SolveResult:
    """Social-welfare target alpha for general monotone valuations.

    Walks agents in decreasing optimal-bundle value; at each step assigns the
    smallest slice of some optimal bundle worth 3*alpha*(step value) to an
    unserved agent, then finishes with the envy-cycles procedure, reassignment,
    and natural transfers.
    """
    alpha = Fraction(alpha)
    if not F0 < alpha <= Fraction(1, 3):
        raise InstanceFormatError("alpha must lie in (0, 1/3]")
    if inst.m > 20:
        raise InstanceFormatError("candidate scan capped at m <= 20")
    if method not in ("enumerate", "greedy-additive"):
        raise InstanceFormatError(f"unknown method {method!r}")
    if method == "greedy-additive" and any(
        o.kind != "additive" for o in inst.valuations
    ):
        raise InstanceFormatError("greedy-additive requires additive valuations")
    opt = brute_sw_opt(inst)
    order = sorted(
        range(inst.n), key=lambda i: (inst.value(i, opt.bundles[i]), -i), reverse=True
    )
    bundles = [0] * inst.n
    assigned = 0
    pick = _candidate_enumerate if method == "enumerate" else _candidate_greedy_additive
    for agent_k in order:
        threshold = 3 * alpha * inst.value(agent_k, opt.bundles[agent_k])
        empty = [j for j in range(inst.n) if bundles[j] == 0]
        if not empty:
            break
        avail = [b & ~assigned for b in opt.bundles]
        choice = pick(inst, avail, empty, threshold)
        if choice is None:
            continue
        recipient = next(
            j for j in empty if sign(inst.value(j, choice) - threshold) >= 0
        )
        bundles[recipient] = choice
        assigned |= choice
    leftover = inst.full_mask & ~assigned
    filled = envy_cycles(inst, leftover, Allocation(tuple(bundles)))
    alloc, _ = reassign_bundles(inst, filled)
    params = {"alpha": alpha}

    def certs(alloc, transfers):
        return certificates_for(inst, alloc, transfers, "alg2", params)

    return _result(inst, alloc, "alg2", params, certs)


# ---------------------------------------------------------------------------
# subadditive baseline


def subadditive_baseline(inst: Instance, rhos: Sequence[Fraction] = ()) -> SolveResult:
    """Iterated matching from scratch, reassignment, and natural transfers.

    Certifies the 1/n welfare floor (utilitarian and Nash forms) and the 2n^2
    total-transfer ceiling; extra rho-mean floors are checked in double
    precision for rho strictly between 0 and 1.
    """
    if inst.declared_class not in ("additive", "subadditive", "matroid_rank"):
        raise InstanceFormatError("baseline requires a subadditive valuation class")
    start = Allocation((0,) * inst.n)
    matched = iterated_matching(inst, inst.full_mask, start)
    alloc, _ = reassign_bundles(inst, matched)
    params = {"rhos": tuple(Fraction(r) for r in rhos)}

    def certs(alloc, transfers):
        return certificates_for(inst, alloc, transfers, "baseline", params)

    return _result(inst, alloc, "baseline", params, certs)


# ---------------------------------------------------------------------------
# certificate recomputation (shared by solve and verify)


def _certs_bounded(inst, alloc, transfers, params):
    bound = Fraction(params["b"]) if not isinstance(params["b"], Fraction) else params["b"]
    subs = min_subsidies(inst, alloc)
    max_sub = F0
    for s in subs.payments:
        if sign(s - max_sub) > 0:
            max_sub = s
    n = inst.n
    return [
        _cert_le("total_transfer_bound", transfers.total_abs(), 2 * bound * n * n),
        _cert_le("per_agent_subsidy_bound", max_sub, 2 * bound * (n - 1)),
    ]


def _certs_nsw_reassign(inst, alloc, transfers, params):
    base = Allocation(tuple(params["base"]))
    prod_base = _nash_prod(inst, base)
    prod_now = _nash_prod(inst, alloc, transfers)
    return [
        _nsw_ratio_cert(
            "nsw_ratio_vs_base", prod_now, prod_base, inst.n, NSW_GUARANTEE
        )
    ]


def _certs_nsw_pipeline(inst, alloc, transfers, params):
    opt = brute_nsw_opt(inst)
    prod_opt = _nash_prod(inst, opt)
    prod_now = _nash_prod(inst, alloc, transfers)
    alpha = Fraction(params.get("alpha", 1))
    factor = float(alpha) * NSW_GUARANTEE
    if params.get("converted"):
        factor *= 0.5
    n = inst.n
    return [
        _nsw_ratio_cert("nsw_ratio_vs_opt", prod_now, prod_opt, n, factor),
        _cert_le("total_transfer_bound", transfers.total_abs(), Fraction(2 * n * n)),
    ]


def _certs_nsw_matroid(inst, alloc, transfers, params):
    opt = brute_nsw_opt(inst)
    prod_opt = _nash_prod(inst, opt)
    prod_now = _nash_prod(inst, alloc, transfers)
    n = inst.n
    return [
        _nsw_ratio_cert("nsw_ratio_vs_opt", prod_now, prod_opt, n, NSW_GUARANTEE),
        _cert_le("total_transfer_bound", transfers.total_abs(), Fraction(2 * n * n)),
    ]


def _certs_alg1(inst, alloc, transfers, params):
    alpha = Fraction(params["alpha"])
    opt = brute_sw_opt(inst)
    vmax = F0
    for i in range(inst.n):
        v = inst.value(i, opt.bundles[i])
        if sign(v - vmax) > 0:
            vmax = v
    return [
        _cert_ge("sw_ratio", social_welfare(inst, alloc), alpha * social_welfare(inst, opt)),
        _cert_le(
            "total_transfer_bound",
            transfers.total_abs(),
            inst.n * (alpha * vmax + 2),
        ),
    ]


def _certs_alg2(inst, alloc, transfers, params):
    alpha = Fraction(params["alpha"])
    opt = brute_sw_opt(inst)
    vmax = F0
    for i in range(inst.n):
        v = inst.value(i, opt.bundles[i])
        if sign(v - vmax) > 0:
            vmax = v
    n = inst.n
    return [
        _cert_ge("sw_ratio", social_welfare(inst, alloc), alpha * social_welfare(inst, opt)),
        _cert_le(
            "total_transfer_bound",
            transfers.total_abs(),
            2 * n * n * (3 * alpha * vmax + 2),
        ),
    ]


def _certs_baseline(inst, alloc, transfers, params):
    from .oracles import brute_rho_opt

    n = inst.n
    certs = [
        _cert_le("total_transfer_bound", transfers.total_abs(), Fraction(2 * n * n)),
        _cert_ge(
            "sw_floor",
            social_welfare(inst, alloc),
            social_welfare(inst, brute_sw_opt(inst)) / n,
        ),
    ]
    nsw_opt = brute_nsw_opt(inst)
    certs.append(
        _cert_ge(
            "nash_floor",
            _nash_prod(inst, alloc, transfers),
            Fraction(1, n) ** n * _nash_prod(inst, nsw_opt),
        )
    )
    for rho in params.get("rhos", ()):
        rho = Fraction(rho)
        if rho in (F0, F1):
            continue  # covered exactly by nash_floor / sw_floor
        from .model import rho_mean

        rho_opt = brute_rho_opt(inst, rho)
        lhs = rho_mean(inst, alloc, transfers, rho)
        rhs = rho_mean(inst, rho_opt, None, rho) / n
        certs.append(
            Certificate(
                f"rho_mean_floor_{rho}",
                lhs,
                rhs,
                holds=lhs >= rhs * (1.0 - NSW_REL_TOL),
                approx=True,
            )
        )
    return certs


_CERT_BUILDERS = {
    "bounded": _certs_bounded,
    "nsw-reassign": _certs_nsw_reassign,
    "nsw": _certs_nsw_pipeline,
    "nsw-matroid": _certs_nsw_matroid,
    "alg1": _certs_alg1,
    "alg2": _certs_alg2,
    "baseline": _certs_baseline,
}


def certificates_for(inst, alloc, transfers, algorithm, params):
    """Recompute an algorithm's certificates from raw allocation + payments.

    Used both when building a SolveResult and when re-verifying a stored one;
    nothing here trusts previously stored certificate values.
    """
    try:
        builder = _CERT_BUILDERS[algorithm]
    except KeyError:
        raise InstanceFormatError(f"unknown algorithm {algorithm!r}") from None
    return builder(inst, alloc, transfers, params)
