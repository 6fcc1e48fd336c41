"""Envy graphs, the freeability characterization, subsidies, transfers."""
from fractions import Fraction
from itertools import product as iproduct

import pytest

from fairtransfers._num import sign
from fairtransfers.envy import (
    bounded_envy,
    build_envy_graph,
    is_ef1,
    is_envy_free,
    is_envy_freeable,
    is_envy_freeable_by_permutation,
    min_subsidies,
    natural_transfers,
)
from fairtransfers.model import Allocation, NotEnvyFreeableError, PaymentVector
from fairtransfers.oracles import gen_random, gen_tightness, iter_assignments

from conftest import additive_instance, longest_path_by_enumeration

F = Fraction


class TestEnvyGraph:
    def test_example_weights(self, example_low_nsw):
        g = build_envy_graph(example_low_nsw, Allocation((1, 2)))
        assert g.w == ((F(0), F(-1, 2)), (F(49, 100), F(0)))

    def test_identical_zero_valuations(self):
        inst = additive_instance([["0", "0"], ["0", "0"]])
        g = build_envy_graph(inst, Allocation((1, 2)))
        assert all(x == 0 for row in g.w for x in row)

    def test_tightness_grand_bundle(self):
        t3 = gen_tightness(3)
        g = build_envy_graph(t3, Allocation((7, 0, 0)))
        assert g.w[1][0] == 1 and g.w[2][0] == 1
        assert g.w[0][1] == -1 and g.w[0][2] == -1
        assert g.w[1][2] == 0 and g.w[2][1] == 0


class TestFreeability:
    def test_example_true_case(self, example_low_nsw):
        cert = is_envy_freeable(example_low_nsw, Allocation((1, 2)))
        assert cert.verdict
        assert cert.potentials == (F(0), F(49, 100))

    def test_example_false_case_with_cycle(self, example_low_nsw):
        cert = is_envy_freeable(example_low_nsw, Allocation((2, 1)))
        assert not cert.verdict
        assert cert.cycle == (0, 1)
        assert cert.cycle_weight == F(1, 100)

    def test_identical_valuations_always_freeable(self):
        inst = additive_instance([["1/2", "1/4"], ["1/2", "1/4"]])
        for bundles in [(0, 3), (1, 2), (2, 1), (3, 0)]:
            assert is_envy_freeable(inst, Allocation(bundles)).verdict

    def test_potentials_certificate_is_feasible(self, example_low_nsw):
        cert = is_envy_freeable(example_low_nsw, Allocation((3, 0)))
        assert cert.verdict
        g = build_envy_graph(example_low_nsw, Allocation((3, 0)))
        l = cert.potentials
        for i in range(2):
            assert sign(l[i]) >= 0
            for j in range(2):
                if i != j:
                    assert sign(l[i] - (g.w[i][j] + l[j])) >= 0

    def test_permutation_oracle_example(self, example_low_nsw):
        assert is_envy_freeable_by_permutation(example_low_nsw, Allocation((1, 2)))
        assert not is_envy_freeable_by_permutation(example_low_nsw, Allocation((2, 1)))

    def test_single_agent(self):
        inst = additive_instance([["1", "1/2"]])
        assert is_envy_freeable_by_permutation(inst, Allocation((3,)))

    def test_equivalence_exhaustive_small(self):
        # every allocation of every tiny instance: cycle test == permutation test
        inst = additive_instance([["1", "1/2", "1/4"], ["1/4", "1", "0"], ["0", "1/2", "1"]])
        for _, masks in iter_assignments(3, 3):
            alloc = Allocation(tuple(masks))
            assert (
                is_envy_freeable(inst, alloc).verdict
                == is_envy_freeable_by_permutation(inst, alloc)
            )

    def test_equivalence_random(self):
        for seed in range(40):
            inst = gen_random(3, 4, "additive", seed)
            for _, masks in iter_assignments(3, 4):
                alloc = Allocation(tuple(masks))
                assert (
                    is_envy_freeable(inst, alloc).verdict
                    == is_envy_freeable_by_permutation(inst, alloc)
                ), (seed, alloc)


class TestMinSubsidies:
    def test_two_agent_example(self):
        inst = additive_instance([["1", "2/5"], ["3/5", "3/5"]])
        s = min_subsidies(inst, Allocation((3, 0)))
        assert s.payments == (F(0), F(6, 5))

    def test_envy_free_needs_nothing(self, example_low_nsw):
        s = min_subsidies(example_low_nsw, Allocation((3, 0)))
        # agent 1's envy of the grand bundle is positive: s = (0, 51/100)
        assert s.payments[0] == 0
        s2 = min_subsidies(
            additive_instance([["1", "0"], ["0", "1"]]), Allocation((1, 2))
        )
        assert s2.payments == (F(0), F(0))

    def test_tightness_subsidies(self):
        t3 = gen_tightness(3)
        s = min_subsidies(t3, Allocation((7, 0, 0)))
        assert s.payments == (F(0), F(1), F(1))

    def test_raises_with_cycle_witness(self, example_low_nsw):
        with pytest.raises(NotEnvyFreeableError) as err:
            min_subsidies(example_low_nsw, Allocation((2, 1)))
        assert err.value.cycle == (0, 1)
        assert err.value.weight == F(1, 100)

    def test_matches_path_enumeration(self):
        for seed in range(30):
            inst = gen_random(3, 4, "additive", 1000 + seed)
            for _, masks in iter_assignments(3, 4):
                alloc = Allocation(tuple(masks))
                cert = is_envy_freeable(inst, alloc)
                if not cert.verdict:
                    continue
                g = build_envy_graph(inst, alloc)
                s = min_subsidies(inst, alloc)
                for i in range(3):
                    assert s.payments[i] == longest_path_by_enumeration(g.w, 3, i)


class TestNaturalTransfers:
    def test_tightness_example(self):
        t = natural_transfers(PaymentVector((F(0), F(1), F(1)), "subsidy"))
        assert t.payments == (F(-2, 3), F(1, 3), F(1, 3))

    def test_zero_stays_zero(self):
        t = natural_transfers(PaymentVector((F(0), F(0)), "subsidy"))
        assert t.payments == (F(0), F(0))

    def test_centering(self):
        t = natural_transfers(PaymentVector((F(0), F(49, 100)), "subsidy"))
        assert t.payments == (F(-49, 200), F(49, 200))

    def test_preserves_envy_freeness(self, example_low_nsw):
        alloc = Allocation((1, 2))
        s = min_subsidies(example_low_nsw, alloc)
        t = natural_transfers(s)
        assert is_envy_free(example_low_nsw, alloc, s).ok
        assert is_envy_free(example_low_nsw, alloc, t).ok


class TestIsEnvyFree:
    def test_tightness_with_natural_transfers(self):
        t3 = gen_tightness(3)
        t = PaymentVector((F(-2, 3), F(1, 3), F(1, 3)), "transfer")
        assert is_envy_free(t3, Allocation((7, 0, 0)), t).ok

    def test_no_payments_equal_bundles(self):
        inst = additive_instance([["1/2", "1/2"], ["1/2", "1/2"]])
        assert is_envy_free(inst, Allocation((1, 2))).ok

    def test_worst_violation_reported(self, example_low_nsw):
        check = is_envy_free(example_low_nsw, Allocation((3, 0)))
        assert not check.ok
        assert check.worst_pair == (1, 0)
        assert check.violation == F(51, 100)


class TestEF1:
    def test_no_envy_implies_ef1(self, example_low_nsw):
        assert is_ef1(example_low_nsw, Allocation((1, 2)))

    def test_grand_bundle_not_ef1(self, example_low_nsw):
        assert not is_ef1(example_low_nsw, Allocation((3, 0)))

    def test_equal_singletons(self):
        inst = additive_instance([["1/2", "1/2"], ["1/2", "1/2"]])
        assert is_ef1(inst, Allocation((1, 2)))


class TestBoundedEnvy:
    def test_envy_free_is_zero(self):
        inst = additive_instance([["1", "0"], ["0", "1"]])
        assert bounded_envy(inst, Allocation((1, 2))) == 0

    def test_freeable_but_envious(self, example_low_nsw):
        assert bounded_envy(example_low_nsw, Allocation((1, 2))) == F(49, 100)

    def test_example_value(self, example_low_nsw):
        assert bounded_envy(example_low_nsw, Allocation((3, 0))) == F(51, 100)

    def test_ef1_normalized_at_most_one(self):
        for seed in range(25):
            inst = gen_random(3, 5, "additive", 2000 + seed)
            for _, masks in iter_assignments(3, 5):
                alloc = Allocation(tuple(masks))
                if is_ef1(inst, alloc):
                    assert sign(bounded_envy(inst, alloc) - 1) <= 0
                    break  # one EF1 allocation per instance keeps this fast
