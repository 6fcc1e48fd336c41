"""Instances, valuation oracles, allocations, payments, and welfare measures.

Items are bitmasks over ``range(m)``; agents are indices ``range(n)``.  All
valuation magnitudes are exact (Fraction, or a sympy radical for the
square-root-of-cardinality oracle).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar, Iterator, Optional, Sequence, Union

from ._num import (
    Num,
    as_float,
    as_fraction,
    format_number,
    is_rational,
    parse_rational,
    sign,
    sqrt_int,
)

VALUATION_CLASSES = ("additive", "subadditive", "matroid_rank", "monotone")

TABLE_MAX_ITEMS = 20
ADDITIVE_MAX_ITEMS = 63
CLASS_CHECK_MAX_ITEMS = 16

F0 = Fraction(0)
F1 = Fraction(1)


class FairDivisionError(Exception):
    """Base class for all library errors."""


class InstanceFormatError(FairDivisionError):
    """Malformed instance file or construction arguments."""


class InvariantViolation(FairDivisionError):
    """A declared invariant fails; carries a concrete witness."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotEnvyFreeableError(FairDivisionError):
    """Raised when payments are requested for a non-envy-freeable allocation."""

    def __init__(self, message, cycle, weight):
        super().__init__(message)
        self.cycle = cycle
        self.weight = weight


class TooLargeError(FairDivisionError):
    """Instance exceeds an enumeration or representation cap."""


def mask_items(mask: int) -> Iterator[int]:
    """Yield item indices set in ``mask``, ascending."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(items) -> int:
    out = 0
    for g in items:
        out |= 1 << g
    return out


@dataclass(frozen=True)
class AdditiveValuation:
    """v(S) = sum of per-item values."""

    item_values: tuple

    kind: ClassVar[str] = "additive"

    def value(self, mask: int) -> Fraction:
        total = F0
        vals = self.item_values
        while mask:
            low = mask & -mask
            total += vals[low.bit_length() - 1]
            mask ^= low
        return total


@dataclass(frozen=True)
class TableValuation:
    """v given explicitly on all 2^m subsets, indexed by bitmask."""

    entries: tuple

    kind: ClassVar[str] = "table"

    def value(self, mask: int) -> Fraction:
        return self.entries[mask]


@dataclass(frozen=True)
class SqrtCardinalityValuation:
    """v(S) = sqrt(|S|), exact; comparisons go through integer squaring."""

    kind: ClassVar[str] = "sqrt_cardinality"

    def value(self, mask: int) -> Num:
        return sqrt_int(mask.bit_count())


Valuation = Union[AdditiveValuation, TableValuation, SqrtCardinalityValuation]


@dataclass(frozen=True)
class Instance:
    """A fair-division instance: n agents, m items, one oracle per agent."""

    n: int
    m: int
    valuations: tuple
    declared_class: str
    class_verified: bool = False

    @property
    def full_mask(self) -> int:
        return (1 << self.m) - 1

    def value(self, agent: int, mask: int) -> Num:
        return self.valuations[agent].value(mask)


@dataclass(frozen=True)
class Allocation:
    """A partition of the item set into n (possibly empty) bundles."""

    bundles: tuple

    @staticmethod
    def from_sets(sets) -> "Allocation":
        return Allocation(tuple(mask_of(s) for s in sets))


@dataclass(frozen=True)
class PaymentVector:
    """Per-agent payments, tagged subsidy (all >= 0) or transfer (sum = 0)."""

    payments: tuple
    kind: str

    def __post_init__(self):
        if self.kind not in ("subsidy", "transfer"):
            raise InstanceFormatError(f"unknown payment kind {self.kind!r}")
        if self.kind == "subsidy":
            for i, p in enumerate(self.payments):
                if sign(p) < 0:
                    raise InvariantViolation(
                        f"subsidy entry {i} is negative", witness=i
                    )
        else:
            total = sum(self.payments, F0)
            if sign(total) != 0:
                raise InvariantViolation(
                    "transfer entries do not sum to zero", witness=total
                )

    def total_abs(self) -> Num:
        total = F0
        for p in self.payments:
            total += p if sign(p) >= 0 else -p
        return total


@dataclass(frozen=True)
class WelfareReport:
    """Utilities and welfare summary for an allocation with payments."""

    sw: Num
    nash_product: Num
    utilities: tuple
    rho: Optional[Fraction] = None
    rho_mean: Optional[float] = None


def zero_payments(n: int, kind: str = "transfer") -> PaymentVector:
    return PaymentVector((F0,) * n, kind)


def check_partition(inst: Instance, alloc: Allocation) -> None:
    """Raise unless ``alloc`` partitions the full item set of ``inst``."""
    if len(alloc.bundles) != inst.n:
        raise InvariantViolation(
            f"allocation has {len(alloc.bundles)} bundles for {inst.n} agents"
        )
    union = 0
    count = 0
    for b in alloc.bundles:
        if b < 0 or b > inst.full_mask:
            raise InvariantViolation(f"bundle {b:#x} outside item set")
        union |= b
        count += b.bit_count()
    if union != inst.full_mask or count != inst.m:
        raise InvariantViolation(
            "bundles are not a partition of the item set",
            witness=tuple(alloc.bundles),
        )


def value(inst: Instance, agent: int, mask: int) -> Num:
    """Exact value of bundle ``mask`` to ``agent``."""
    if not 0 <= agent < inst.n:
        raise InstanceFormatError(f"agent index {agent} out of range")
    if mask < 0 or mask > inst.full_mask:
        raise InstanceFormatError(f"bundle {mask:#x} outside item set")
    return inst.valuations[agent].value(mask)


def _check_payments(inst: Instance, payments: Optional[PaymentVector]):
    if payments is not None and len(payments.payments) != inst.n:
        raise InstanceFormatError("payment vector length differs from agent count")


def social_welfare(inst, alloc, transfers: Optional[PaymentVector] = None) -> Num:
    """Sum of own-bundle values; zero-sum transfers never change it."""
    check_partition(inst, alloc)
    _check_payments(inst, transfers)
    total = F0
    for i, b in enumerate(alloc.bundles):
        total += inst.value(i, b)
    return total


def utilities(inst, alloc, payments: Optional[PaymentVector] = None) -> tuple:
    check_partition(inst, alloc)
    _check_payments(inst, payments)
    out = []
    for i, b in enumerate(alloc.bundles):
        u = inst.value(i, b)
        if payments is not None:
            u = u + payments.payments[i]
        out.append(u)
    return tuple(out)


def nash_product(inst, alloc, transfers: Optional[PaymentVector] = None) -> Num:
    """Product of utilities, i.e. NSW to the n-th power, exact."""
    prod = F1
    for u in utilities(inst, alloc, transfers):
        if sign(u) < 0:
            raise InvariantViolation(
                "NSW undefined for negative utility", witness=u
            )
        prod = prod * u
    return prod


def rho_mean(inst, alloc, transfers, rho: Fraction) -> float:
    """Power-mean welfare ((1/n) sum u_i^rho)^(1/rho) for rho in (0, 1].

    Exact at rho=1 (computed exactly, then converted); double precision
    otherwise.
    """
    rho = Fraction(rho)
    if not F0 < rho <= F1:
        raise InstanceFormatError("rho must lie in (0, 1]")
    us = utilities(inst, alloc, transfers)
    for u in us:
        if sign(u) < 0:
            raise InvariantViolation("rho-mean undefined for negative utility")
    if rho == 1:
        total = sum(us, F0)
        return as_float(total / inst.n if is_rational(total) else total / inst.n)
    r = float(rho)
    acc = sum(as_float(u) ** r for u in us) / inst.n
    return acc ** (1.0 / r)


def welfare_report(inst, alloc, transfers=None, rho: Optional[Fraction] = None) -> WelfareReport:
    us = utilities(inst, alloc, transfers)
    sw = sum(us, F0)
    prod = F1
    defined = True
    for u in us:
        if sign(u) < 0:
            defined = False
            break
        prod = prod * u
    rm = rho_mean(inst, alloc, transfers, rho) if rho is not None else None
    return WelfareReport(
        sw=sw,
        nash_product=prod if defined else F0,
        utilities=us,
        rho=Fraction(rho) if rho is not None else None,
        rho_mean=rm,
    )


# ---------------------------------------------------------------------------
# marginals, normalization, validation


def max_marginal(inst: Instance) -> Num:
    """Largest marginal value of a single item for any agent."""
    best = F0
    for oracle in inst.valuations:
        if oracle.kind == "additive":
            for v in oracle.item_values:
                if sign(v - best) > 0:
                    best = v
        elif oracle.kind == "sqrt_cardinality":
            if sign(F1 - best) > 0:
                best = F1
        else:
            for s in range(1 << inst.m):
                vs = oracle.entries[s]
                for g in range(inst.m):
                    if s & (1 << g):
                        continue
                    marg = oracle.entries[s | (1 << g)] - vs
                    if sign(marg - best) > 0:
                        best = marg
    return best


def scale_instance(inst: Instance, factor: Fraction) -> Instance:
    """Multiply every valuation by a positive rational factor."""
    factor = Fraction(factor)
    if factor <= 0:
        raise InstanceFormatError("scale factor must be positive")
    oracles = []
    for oracle in inst.valuations:
        if oracle.kind == "additive":
            oracles.append(AdditiveValuation(tuple(v * factor for v in oracle.item_values)))
        elif oracle.kind == "table":
            oracles.append(TableValuation(tuple(v * factor for v in oracle.entries)))
        else:
            if factor != 1:
                raise InstanceFormatError(
                    "cannot rescale a sqrt_cardinality oracle; "
                    "its values are fixed at sqrt(|S|)"
                )
            oracles.append(oracle)
    return Instance(inst.n, inst.m, tuple(oracles), inst.declared_class, inst.class_verified)


def normalize(inst: Instance) -> Instance:
    """Scale valuations so the maximum marginal value is exactly 1."""
    mu = max_marginal(inst)
    if sign(mu) == 0:
        return inst
    if not is_rational(mu):
        raise InstanceFormatError("cannot normalize: max marginal is irrational")
    mu = as_fraction(mu)
    if mu == 1:
        return inst
    return scale_instance(inst, F1 / mu)


def _check_monotone_and_marginals(inst: Instance):
    """Exhaustive monotonicity + marginal-cap check where feasible."""
    for a, oracle in enumerate(inst.valuations):
        if oracle.kind == "additive":
            for g, v in enumerate(oracle.item_values):
                if v < 0:
                    raise InvariantViolation(
                        f"agent {a}: negative item value (non-monotone)",
                        witness=(a, g),
                    )
                if v > 1:
                    raise InvariantViolation(
                        f"agent {a}: marginal value of item {g} exceeds 1",
                        witness=(a, g),
                    )
        elif oracle.kind == "table":
            if sign(oracle.entries[0]) != 0:
                raise InvariantViolation(
                    f"agent {a}: nonzero empty-set value", witness=(a, 0)
                )
            if inst.m > CLASS_CHECK_MAX_ITEMS:
                continue
            for s in range(1 << inst.m):
                vs = oracle.entries[s]
                for g in range(inst.m):
                    if s & (1 << g):
                        continue
                    t = s | (1 << g)
                    marg = oracle.entries[t] - vs
                    if sign(marg) < 0:
                        raise InvariantViolation(
                            f"agent {a}: monotonicity violation", witness=(s, t)
                        )
                    if sign(marg - F1) > 0:
                        raise InvariantViolation(
                            f"agent {a}: marginal value exceeds 1", witness=(s, t)
                        )
        # sqrt_cardinality is monotone with marginals <= 1 by construction


def _table_is_additive(oracle, m) -> bool:
    singles = [oracle.entries[1 << g] for g in range(m)]
    for s in range(1 << m):
        total = F0
        for g in mask_items(s):
            total += singles[g]
        if oracle.entries[s] != total:
            return False
    return True


def _table_is_subadditive(oracle, m):
    """Return a violating (S, T) pair of disjoint sets, or None."""
    full = (1 << m) - 1
    for s in range(1, full + 1):
        rest = full & ~s
        # iterate subsets t of the complement, t nonzero
        t = rest
        while t:
            if sign(oracle.entries[s | t] - oracle.entries[s] - oracle.entries[t]) > 0:
                return (s, t)
            t = (t - 1) & rest
    return None


def _table_is_matroid_rank(oracle, m):
    """Binary marginals plus local submodularity; returns a witness or None."""
    for s in range(1 << m):
        vs = oracle.entries[s]
        for g in range(m):
            if s & (1 << g):
                continue
            marg = oracle.entries[s | (1 << g)] - vs
            if marg not in (F0, F1):
                return (s, g)
    for s in range(1 << m):
        for g in range(m):
            if s & (1 << g):
                continue
            for h in range(g + 1, m):
                if s & (1 << h):
                    continue
                lhs = oracle.entries[s | (1 << g)] + oracle.entries[s | (1 << h)]
                rhs = oracle.entries[s | (1 << g) | (1 << h)] + oracle.entries[s]
                if lhs < rhs:
                    return (s, (g, h))
    return None


def _verify_class(inst: Instance) -> bool:
    """Check declared_class exhaustively; True when fully verified."""
    klass = inst.declared_class
    if klass == "monotone":
        return all(o.kind != "table" for o in inst.valuations) or inst.m <= CLASS_CHECK_MAX_ITEMS
    verified = True
    for a, oracle in enumerate(inst.valuations):
        if klass == "additive":
            if oracle.kind == "additive":
                continue
            if oracle.kind == "sqrt_cardinality":
                raise InvariantViolation(
                    f"agent {a}: sqrt_cardinality oracle is not additive",
                    witness=a,
                )
            if inst.m > CLASS_CHECK_MAX_ITEMS:
                verified = False
                continue
            if not _table_is_additive(oracle, inst.m):
                raise InvariantViolation(
                    f"agent {a}: table is not additive", witness=a
                )
        elif klass == "subadditive":
            if oracle.kind in ("additive", "sqrt_cardinality"):
                continue  # subadditive by construction
            if inst.m > CLASS_CHECK_MAX_ITEMS:
                verified = False
                continue
            bad = _table_is_subadditive(oracle, inst.m)
            if bad is not None:
                raise InvariantViolation(
                    f"agent {a}: subadditivity violation", witness=bad
                )
        elif klass == "matroid_rank":
            if oracle.kind == "sqrt_cardinality":
                raise InvariantViolation(
                    f"agent {a}: sqrt_cardinality oracle is not matroid rank",
                    witness=a,
                )
            if oracle.kind == "additive":
                for g, v in enumerate(oracle.item_values):
                    if v not in (F0, F1):
                        raise InvariantViolation(
                            f"agent {a}: non-binary marginal", witness=(a, g)
                        )
                continue
            if inst.m > CLASS_CHECK_MAX_ITEMS:
                verified = False
                continue
            bad = _table_is_matroid_rank(oracle, inst.m)
            if bad is not None:
                raise InvariantViolation(
                    f"agent {a}: matroid-rank violation", witness=bad
                )
    return verified


def validate_instance(inst: Instance) -> Instance:
    """Run every load-time invariant; returns the instance with the verified flag."""
    if inst.n < 1:
        raise InstanceFormatError("need at least one agent")
    if inst.m < 0:
        raise InstanceFormatError("negative item count")
    if inst.declared_class not in VALUATION_CLASSES:
        raise InstanceFormatError(f"unknown class {inst.declared_class!r}")
    if len(inst.valuations) != inst.n:
        raise InstanceFormatError("valuation count differs from agent count")
    for a, oracle in enumerate(inst.valuations):
        if oracle.kind == "additive":
            if inst.m > ADDITIVE_MAX_ITEMS:
                raise TooLargeError(f"additive oracles capped at m <= {ADDITIVE_MAX_ITEMS}")
            if len(oracle.item_values) != inst.m:
                raise InstanceFormatError(f"agent {a}: expected {inst.m} item values")
        elif oracle.kind == "table":
            if inst.m > TABLE_MAX_ITEMS:
                raise TooLargeError(f"table oracles capped at m <= {TABLE_MAX_ITEMS}")
            if len(oracle.entries) != 1 << inst.m:
                raise InstanceFormatError(
                    f"agent {a}: table must cover all {1 << inst.m} subsets"
                )
            if sign(oracle.entries[0]) != 0:
                raise InvariantViolation(
                    f"agent {a}: nonzero empty-set value", witness=(a, 0)
                )
    _check_monotone_and_marginals(inst)
    verified = _verify_class(inst)
    return Instance(inst.n, inst.m, inst.valuations, inst.declared_class, verified)


# ---------------------------------------------------------------------------
# JSON instance format


def _oracle_from_obj(obj, m: int):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InstanceFormatError("valuation entry must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "additive":
        vals = obj.get("values")
        if not isinstance(vals, list):
            raise InstanceFormatError("additive oracle needs a 'values' list")
        try:
            return AdditiveValuation(tuple(parse_rational(v) for v in vals))
        except ValueError as exc:
            raise InstanceFormatError(str(exc)) from exc
    if kind == "table":
        entries = obj.get("entries")
        if not isinstance(entries, dict):
            raise InstanceFormatError("table oracle needs an 'entries' object")
        if m > TABLE_MAX_ITEMS:
            raise TooLargeError(f"table oracles capped at m <= {TABLE_MAX_ITEMS}")
        size = 1 << m
        out = [None] * size
        for key, val in entries.items():
            try:
                mask = int(key)
            except ValueError as exc:
                raise InstanceFormatError(f"bad table key {key!r}") from exc
            if not 0 <= mask < size:
                raise InstanceFormatError(f"table key {key!r} out of range")
            try:
                out[mask] = parse_rational(val)
            except ValueError as exc:
                raise InstanceFormatError(str(exc)) from exc
        missing = [i for i, v in enumerate(out) if v is None]
        if missing:
            raise InstanceFormatError(
                f"table is missing {len(missing)} subsets (first: {missing[0]})"
            )
        return TableValuation(tuple(out))
    if kind == "sqrt_cardinality":
        return SqrtCardinalityValuation()
    raise InstanceFormatError(f"unknown valuation kind {kind!r}")


def instance_from_dict(obj) -> Instance:
    if not isinstance(obj, dict):
        raise InstanceFormatError("instance file must contain a JSON object")
    try:
        n = int(obj["agents"])
        m = int(obj["items"])
        klass = obj["class"]
        vals = obj["valuations"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"missing or malformed field: {exc}") from exc
    if not isinstance(vals, list) or len(vals) != n:
        raise InstanceFormatError("'valuations' must list one oracle per agent")
    oracles = tuple(_oracle_from_obj(v, m) for v in vals)
    return validate_instance(Instance(n, m, oracles, klass))


def load_instance(text: str) -> Instance:
    """Parse and validate an instance from its JSON text."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON: {exc}") from exc
    return instance_from_dict(obj)


def instance_to_dict(inst: Instance) -> dict:
    vals = []
    for oracle in inst.valuations:
        if oracle.kind == "additive":
            vals.append(
                {"kind": "additive", "values": [format_number(v) for v in oracle.item_values]}
            )
        elif oracle.kind == "table":
            vals.append(
                {
                    "kind": "table",
                    "entries": {str(s): format_number(v) for s, v in enumerate(oracle.entries)},
                }
            )
        else:
            vals.append({"kind": "sqrt_cardinality"})
    return {
        "agents": inst.n,
        "items": inst.m,
        "class": inst.declared_class,
        "valuations": vals,
    }


def instance_to_json(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2, sort_keys=True)
