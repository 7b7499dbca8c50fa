"""Numberings, immunity audits, and exact cylinder measures."""

import random
from dataclasses import replace

import pytest

from dnrlab.asm import DIVERGE_INDEX, IDENTITY_INDEX, ZERO_INDEX, assemble_index, const_index
from dnrlab.dyadic import ZERO, DyadicRational
from dnrlab.errors import (
    CombinatorialBlowup,
    InsufficientOracle,
    PreconditionViolated,
    WitnessBudgetExceeded,
)
from dnrlab.machine import gamma
from dnrlab.numbering import (
    TableNumbering,
    adversarial_numbering,
    brute_force_union_measure,
    canonical_immunity_audit,
    lowness_bound_check,
    schnorr_measure,
    snr_collision_audit,
    snr_from_immune_oracle,
    union_cylinder_measure,
)
from dnrlab.oracle import EVENS, ODDS, SetOracle

# total characteristic function of the even numbers
CHAR_EVENS = assemble_index("""
    load r1, 2
    mod r2, r0, r1
    jz r2, one
    load r3, 0
    halt r3
one:
    load r3, 1
    halt r3
""")

H_ONE = const_index(1)


@pytest.fixture(scope="module")
def evens_numbering():
    return adversarial_numbering(CHAR_EVENS, H_ONE)


class TestAdversarialNumbering:
    def test_even_index_slices_the_support(self, evens_numbering):
        assert evens_numbering.finite_set(0) == frozenset({0, 2})
        assert evens_numbering.finite_set(4) == frozenset({0, 2})

    def test_even_index_exceeds_the_bound(self, evens_numbering):
        assert len(evens_numbering.finite_set(0)) == 2 > 1

    def test_odd_index_is_the_bit_sum_set(self, evens_numbering):
        assert evens_numbering.finite_set(1) == frozenset()
        assert evens_numbering.finite_set(5) == gamma(2)
        assert evens_numbering.finite_set(7) == gamma(3)
        assert evens_numbering.finite_set(9) == gamma(4)

    def test_membership_bits(self, evens_numbering):
        assert evens_numbering.member_bit(0, 2) == 1
        assert evens_numbering.member_bit(0, 1) == 0
        assert evens_numbering.member_bit(0, 4) == 0  # rank 3 > h+1

    def test_agreement_audit_clean(self, evens_numbering):
        assert evens_numbering.audit_agreement(range(10)) == []

    def test_declared_sizes(self, evens_numbering):
        assert evens_numbering.declared_size(6) == 2
        assert evens_numbering.declared_size(7) == 2  # popcount(3)

    def test_scan_cap_trips(self, evens_numbering):
        tight = replace(evens_numbering, scan_cap=2)
        with pytest.raises(InsufficientOracle):
            tight.finite_set(0)

    def test_preconditions(self):
        with pytest.raises(PreconditionViolated):
            adversarial_numbering(DIVERGE_INDEX, H_ONE)
        with pytest.raises(PreconditionViolated):
            adversarial_numbering(const_index(5), H_ONE)
        with pytest.raises(PreconditionViolated):
            adversarial_numbering(ZERO_INDEX, H_ONE)  # empty support
        with pytest.raises(PreconditionViolated):
            adversarial_numbering(CHAR_EVENS, DIVERGE_INDEX)


class TestSnrValue:
    def test_evens_slice_code(self):
        assert snr_from_immune_oracle(EVENS, H_ONE, 0, 10_000) == 5

    def test_odds_slice_code(self):
        assert snr_from_immune_oracle(ODDS, H_ONE, 0, 10_000) == 10

    def test_slice_size_matches_the_bound(self):
        for e in range(6):
            code = snr_from_immune_oracle(EVENS, H_ONE, e, 10_000)
            assert len(gamma(code)) == 2

    def test_thin_oracle(self):
        with pytest.raises(InsufficientOracle):
            snr_from_immune_oracle(SetOracle(frozenset({3})), H_ONE, 0, 10_000)

    def test_budget(self):
        with pytest.raises(WitnessBudgetExceeded):
            snr_from_immune_oracle(EVENS, DIVERGE_INDEX, 0, 10_000)

    def test_zero_function_never_collides(self):
        assert snr_collision_audit(ZERO_INDEX, EVENS, H_ONE, 20, 10_000) == []


class TestImmunityAudit:
    def test_adversarial_violates_at_even_indices(self, evens_numbering):
        violations = canonical_immunity_audit(EVENS, H_ONE, evens_numbering, 10, 10_000)
        assert [v["e"] for v in violations] == [0, 2, 4, 6, 8, 10]
        for v in violations:
            assert len(v["members"]) == v["h_value"] + 1

    def test_disjoint_target_is_clean(self, evens_numbering):
        assert canonical_immunity_audit(ODDS, H_ONE, evens_numbering, 10, 10_000) == []

    def test_generous_bound_is_clean(self, evens_numbering):
        assert canonical_immunity_audit(
            EVENS, const_index(5), evens_numbering, 10, 10_000) == []


class TestUnionMeasure:
    def test_empty_family(self):
        assert union_cylinder_measure([]) == ZERO

    def test_single_pair(self):
        assert union_cylinder_measure([frozenset({0, 1})]) == DyadicRational(1, 2)

    def test_disjoint_supports(self):
        got = union_cylinder_measure([frozenset({0}), frozenset({1, 2})])
        want = DyadicRational(1, 1) + DyadicRational(1, 2) - DyadicRational(1, 3)
        assert got == want

    def test_duplicates_collapse(self):
        one = union_cylinder_measure([frozenset({0, 1})])
        two = union_cylinder_measure([frozenset({0, 1}), frozenset({0, 1})])
        assert one == two

    def test_empty_constraint_is_everything(self):
        assert union_cylinder_measure([frozenset(), frozenset({3})]) == DyadicRational(1)

    def test_term_cap(self):
        family = [frozenset({i}) for i in range(8)]
        with pytest.raises(CombinatorialBlowup) as info:
            union_cylinder_measure(family, term_cap=100)
        assert info.value.upper_bound == DyadicRational(8, 1)

    def test_against_brute_force(self):
        rng = random.Random(7)
        for _ in range(60):
            family = [
                frozenset(rng.sample(range(10), rng.randint(1, 4)))
                for _ in range(rng.randint(1, 5))
            ]
            assert union_cylinder_measure(family) == brute_force_union_measure(family)


class TestSchnorrMeasure:
    def test_no_qualifying_sets(self):
        numbering = TableNumbering((frozenset({0}), frozenset({1})))
        assert schnorr_measure(numbering, 0, 1) == ZERO

    def test_single_pair_at_level_one(self):
        numbering = TableNumbering((frozenset(), frozenset({0, 1})))
        assert schnorr_measure(numbering, 0, 1) == DyadicRational(1, 2)

    def test_disjoint_supports_formula(self):
        d1, d2 = frozenset({0, 1}), frozenset({2, 3, 4, 5})
        numbering = TableNumbering((frozenset(), d1, d2))
        want = (DyadicRational(1, 2) + DyadicRational(1, 4)
                - DyadicRational(1, 6))
        assert schnorr_measure(numbering, 0, 2) == want

    def test_toy_backed_numbering(self):
        numbering = adversarial_numbering(CHAR_EVENS, const_index(4))
        # only e = 2 qualifies: 5 members >= 4; the set is the first 5 evens
        assert schnorr_measure(numbering, 1, 2) == DyadicRational(1, 5)

    def test_matches_brute_force(self):
        rng = random.Random(11)
        for _ in range(25):
            sets = [frozenset()] + [
                frozenset(rng.sample(range(2 * e, 2 * e + 6), min(6, 2 * e + rng.randint(0, 2))))
                for e in range(1, 4)
            ]
            numbering = TableNumbering(tuple(sets))
            got = schnorr_measure(numbering, 0, 3)
            qualifying = [s for e, s in enumerate(sets) if e > 0 and len(s) >= 2 * e]
            assert got == brute_force_union_measure(qualifying)


class TestLownessBound:
    def test_identity_family_holds(self):
        verdict = lowness_bound_check(H_ONE, IDENTITY_INDEX, IDENTITY_INDEX, 0, 10, 10_000)
        assert verdict.holds
        # sum of 2^-(e+1) for e in 1..10
        want = DyadicRational(1, 1) - DyadicRational(1, 11)
        assert verdict.partial_sum == want

    def test_flat_bound_violates_at_two(self):
        verdict = lowness_bound_check(
            const_index(4), IDENTITY_INDEX, ZERO_INDEX, 1, 5, 10_000)
        assert not verdict.holds
        assert verdict.first_violation == 2
        assert verdict.violating_term == DyadicRational(2)

    def test_empty_range(self):
        verdict = lowness_bound_check(H_ONE, IDENTITY_INDEX, IDENTITY_INDEX, 5, 5, 10_000)
        assert verdict.holds
        assert verdict.partial_sum == ZERO

    def test_budget(self):
        with pytest.raises(WitnessBudgetExceeded):
            lowness_bound_check(H_ONE, DIVERGE_INDEX, ZERO_INDEX, 0, 3, 10_000)

    def test_jsonable(self):
        verdict = lowness_bound_check(H_ONE, IDENTITY_INDEX, IDENTITY_INDEX, 0, 4, 10_000)
        blob = verdict.to_jsonable()
        assert blob["holds"] is True
        assert DyadicRational.from_jsonable(blob["partial_sum"]) == verdict.partial_sum
