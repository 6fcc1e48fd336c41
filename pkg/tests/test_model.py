"""Model layer: parsing, validation, welfare functionals, normalization."""
import json
import math
from fractions import Fraction

import pytest

from fairtransfers._num import format_number, parse_rational, sign, sqrt_int
from fairtransfers.model import (
    AdditiveValuation,
    Allocation,
    Instance,
    InstanceFormatError,
    InvariantViolation,
    PaymentVector,
    SqrtCardinalityValuation,
    TableValuation,
    instance_to_json,
    load_instance,
    nash_product,
    normalize,
    rho_mean,
    social_welfare,
    validate_instance,
    value,
)

from conftest import additive_instance

F = Fraction


def make_file(obj):
    return json.dumps(obj)


class TestLoadInstance:
    def test_two_agent_additive(self):
        text = make_file(
            {
                "agents": 2,
                "items": 2,
                "class": "additive",
                "valuations": [
                    {"kind": "additive", "values": ["1", "1/2"]},
                    {"kind": "additive", "values": ["1/2", "1/100"]},
                ],
            }
        )
        inst = load_instance(text)
        assert (inst.n, inst.m) == (2, 2)
        assert inst.declared_class == "additive"
        assert inst.class_verified
        assert inst.valuations[1].item_values == (F(1, 2), F(1, 100))

    def test_nonzero_empty_set_value(self):
        text = make_file(
            {
                "agents": 1,
                "items": 1,
                "class": "monotone",
                "valuations": [{"kind": "table", "entries": {"0": "1/3", "1": "1"}}],
            }
        )
        with pytest.raises(InvariantViolation, match="empty-set"):
            load_instance(text)

    def test_monotonicity_violation_carries_witness(self):
        # v({0,1}) < v({0})
        text = make_file(
            {
                "agents": 1,
                "items": 2,
                "class": "monotone",
                "valuations": [
                    {
                        "kind": "table",
                        "entries": {"0": "0", "1": "1", "2": "1/2", "3": "1/2"},
                    }
                ],
            }
        )
        with pytest.raises(InvariantViolation) as err:
            load_instance(text)
        assert err.value.witness == (1, 3)

    def test_marginal_above_one_rejected(self):
        with pytest.raises(InvariantViolation, match="marginal"):
            additive_instance([["3/2"]])

    def test_class_mismatch(self):
        # superadditive table declared subadditive
        text = make_file(
            {
                "agents": 1,
                "items": 2,
                "class": "subadditive",
                "valuations": [
                    {
                        "kind": "table",
                        "entries": {"0": "0", "1": "1/4", "2": "1/4", "3": "1"},
                    }
                ],
            }
        )
        with pytest.raises(InvariantViolation, match="subadditivity"):
            load_instance(text)

    def test_table_must_cover_all_subsets(self):
        text = make_file(
            {
                "agents": 1,
                "items": 2,
                "class": "monotone",
                "valuations": [{"kind": "table", "entries": {"0": "0", "1": "1"}}],
            }
        )
        with pytest.raises(InstanceFormatError, match="missing"):
            load_instance(text)

    def test_json_roundtrip(self):
        inst = additive_instance([["1", "1/2"], ["1/2", "1/100"]])
        again = load_instance(instance_to_json(inst))
        assert again == inst


class TestValue:
    def test_example_bundle_value(self, example_low_nsw):
        assert value(example_low_nsw, 0, 0b11) == F(3, 2)

    def test_empty_set_is_zero(self, example_low_nsw):
        for a in range(2):
            assert value(example_low_nsw, a, 0) == 0

    def test_additive_sum_of_singletons(self):
        inst = additive_instance([["1", "9/10", "1/10", "1/10"]])
        assert value(inst, 0, 0b0011) == F(19, 10)

    def test_bad_agent_index(self, example_low_nsw):
        with pytest.raises(InstanceFormatError):
            value(example_low_nsw, 5, 0)


class TestWelfare:
    def test_grand_bundle_social_welfare(self):
        from fairtransfers.oracles import gen_tightness

        t3 = gen_tightness(3)
        assert social_welfare(t3, Allocation((7, 0, 0))) == 1

    def test_empty_item_set(self):
        inst = additive_instance([[], []])
        assert social_welfare(inst, Allocation((0, 0))) == 0

    def test_transfers_never_change_sw(self):
        from fairtransfers.oracles import gen_tightness

        t3 = gen_tightness(3)
        t = PaymentVector((F(-2, 3), F(1, 3), F(1, 3)), "transfer")
        assert social_welfare(t3, Allocation((7, 0, 0)), t) == 1

    def test_nash_product_example(self, example_low_nsw):
        assert nash_product(example_low_nsw, Allocation((2, 1))) == F(1, 4)

    def test_nash_product_empty_bundle(self, example_low_nsw):
        assert nash_product(example_low_nsw, Allocation((3, 0))) == 0

    def test_nash_product_with_transfers(self, example_low_nsw):
        t = PaymentVector((F(-49, 200), F(49, 200)), "transfer")
        assert nash_product(example_low_nsw, Allocation((1, 2)), t) == F(7701, 40000)

    def test_nash_product_negative_utility(self, example_low_nsw):
        t = PaymentVector((F(-2), F(2)), "transfer")
        with pytest.raises(InvariantViolation, match="negative utility"):
            nash_product(example_low_nsw, Allocation((1, 2)), t)

    def test_rho_one_matches_mean(self):
        from fairtransfers.oracles import gen_tightness

        t3 = gen_tightness(3)
        assert rho_mean(t3, Allocation((7, 0, 0)), None, F(1)) == pytest.approx(1 / 3)

    def test_rho_half_constant(self):
        inst = additive_instance([["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])
        assert rho_mean(inst, Allocation((1, 2, 4)), None, F(1, 2)) == pytest.approx(1.0)

    def test_rho_half_example(self):
        inst = additive_instance([["1", "1", "1", "1", "0"], ["0", "0", "0", "0", "1"]])
        # utilities (4, 1): ((2+1)/2)^2 = 2.25
        assert rho_mean(inst, Allocation((0b01111, 0b10000)), None, F(1, 2)) == pytest.approx(2.25)

    def test_rho_out_of_range(self, example_low_nsw):
        with pytest.raises(InstanceFormatError):
            rho_mean(example_low_nsw, Allocation((3, 0)), None, F(3, 2))


class TestNormalize:
    def test_divide_by_max(self):
        inst = Instance(1, 2, (AdditiveValuation((F(2), F(4))),), "additive")
        out = normalize(inst)
        assert out.valuations[0].item_values == (F(1, 2), F(1))

    def test_already_normalized(self, example_low_nsw):
        assert normalize(example_low_nsw) is example_low_nsw

    def test_all_zero_unchanged(self):
        inst = additive_instance([["0", "0"]])
        assert normalize(inst) is inst

    def test_table_marginals(self):
        inst = Instance(
            1, 1, (TableValuation((F(0), F(3))),), "monotone"
        )
        out = normalize(inst)
        assert out.valuations[0].entries == (F(0), F(1))


class TestPayments:
    def test_subsidy_rejects_negative(self):
        with pytest.raises(InvariantViolation):
            PaymentVector((F(-1), F(0)), "subsidy")

    def test_transfer_rejects_nonzero_sum(self):
        with pytest.raises(InvariantViolation):
            PaymentVector((F(1), F(1)), "transfer")


class TestSqrtValues:
    def test_perfect_squares_are_rational(self):
        oracle = SqrtCardinalityValuation()
        assert oracle.value(0b1111) == 2

    def test_squared_comparison_identity(self):
        # sqrt(k) >= q  iff  k >= q^2, for q >= 0, checked for k <= 100
        qs = [F(0), F(1, 3), F(1), F(3, 2), F(7, 2), F(10), F(21, 2)]
        for k in range(101):
            root = sqrt_int(k)
            for q in qs:
                assert (sign(root - q) >= 0) == (k >= q * q)

    def test_monotone_in_cardinality(self):
        oracle = SqrtCardinalityValuation()
        prev = oracle.value(0)
        for size in range(1, 12):
            cur = oracle.value((1 << size) - 1)
            assert sign(cur - prev) > 0
            prev = cur


class TestNumbers:
    def test_parse_and_format(self):
        assert parse_rational("-3/5") == F(-3, 5)
        assert format_number(F(7)) == "7"
        assert format_number(F(-3, 5)) == "-3/5"

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_rational("one half")

    def test_radical_cancellation(self):
        assert sign(sqrt_int(8) - 2 * sqrt_int(2)) == 0
        assert sign(sqrt_int(17) - sqrt_int(8) - F(13, 10)) < 0
        assert sign(sqrt_int(17) - sqrt_int(8) - F(129, 100)) > 0
