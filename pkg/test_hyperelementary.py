"""Tests for subgroups of the finite quotients and the hyper-elementary lemmas."""

import pytest

from fj_workbench.base.group_core import FiniteQuotientDesc, GroupElement, IntMatrix
from fj_workbench.base.hyperelementary import (
    HyperWitness,
    PreimageCondition,
    check_lemma_hyp_elm,
    closure,
    conjugate_subgroup,
    cyclic_subgroups,
    enumerate_hyperelementary,
    enumerate_subgroups,
    enumerate_subgroups_naive,
    find_lemma_prime_power,
    is_hyperelementary,
    is_hyperelementary_by_scan,
    subgroup_from_parts,
    verify_witness,
)
from fj_workbench.errors import CapExceeded, HypothesisViolated, PreconditionFailed

CAT = IntMatrix.from_rows([[2, 1], [1, 1]])


@pytest.fixture(scope="module")
def F6():
    return FiniteQuotientDesc.for_matrix(CAT, 6)


@pytest.fixture(scope="module")
def hyperelementary_F6(F6):
    return enumerate_hyperelementary(F6, cap=20_000)


def test_closure_of_nothing_is_trivial(F6):
    H = closure(F6, [])
    assert H.order == 1
    assert H.elements == (F6.identity(),)


def test_closure_orders(F6):
    H = closure(F6, [GroupElement((0, 0), 1)])
    assert H.order == 72
    assert H.intersection_order == 1
    assert len(H.elements) == H.order


def test_lattice_part_is_not_hyperelementary(F6):
    # (Z/6)^2 has no cyclic normal subgroup of prime-power index
    H = closure(F6, [GroupElement((1, 0), 0), GroupElement((0, 1), 0)])
    assert H.order == 36
    assert is_hyperelementary(H) is None
    assert is_hyperelementary_by_scan(H) is None


def test_cyclic_subgroups_are_hyperelementary(F6):
    H = closure(F6, [GroupElement((1, 0), 1)])
    witness = is_hyperelementary(H)
    assert witness is not None
    assert verify_witness(H, witness)


@pytest.mark.parametrize("s", [2, 3])
def test_enumeration_matches_element_level_lattice(s):
    F = FiniteQuotientDesc.for_matrix(CAT, s)
    structural = enumerate_subgroups(F)
    assert len({H for H in structural}) == len(structural)
    assert {frozenset(H.elements) for H in structural} == enumerate_subgroups_naive(F)


@pytest.mark.parametrize("s", [2, 3])
def test_structural_test_agrees_with_scan(s):
    F = FiniteQuotientDesc.for_matrix(CAT, s)
    for H in enumerate_subgroups(F):
        witness = is_hyperelementary(H)
        assert (witness is None) == (is_hyperelementary_by_scan(H) is None)
        if witness is not None:
            assert verify_witness(H, witness)


def test_enumeration_cap(F6):
    with pytest.raises(CapExceeded):
        enumerate_subgroups(F6, cap=100)


def test_hyperelementary_lemma_holds_exhaustively(F6, hyperelementary_F6):
    assert hyperelementary_F6
    seen = set()
    for H in hyperelementary_F6:
        q, condition = check_lemma_hyp_elm(F6, H, 2, 3)
        assert q in (2, 3)
        if condition in (PreimageCondition.LATTICE, PreimageCondition.BOTH):
            assert all(a % q == 0 for row in H.lattice for a in row)
        if condition in (PreimageCondition.IMAGE, PreimageCondition.BOTH):
            assert H.j % q == 0
        seen.add(condition)
    assert PreimageCondition.IMAGE in seen or PreimageCondition.BOTH in seen


def test_lemma_needs_two_prime_modulus(F6, hyperelementary_F6):
    with pytest.raises(PreconditionFailed):
        check_lemma_hyp_elm(F6, hyperelementary_F6[0], 2, 5)


def test_lemma_rejects_subgroups_that_are_not_hyperelementary(F6):
    lattice = closure(F6, [GroupElement((1, 0), 0), GroupElement((0, 1), 0)])
    with pytest.raises(HypothesisViolated) as info:
        check_lemma_hyp_elm(F6, lattice, 2, 3)
    assert info.value.details["subgroup"] == lattice.to_dict()


def test_lemma_checks_a_supplied_witness(F6):
    H = closure(F6, [GroupElement((1, 0), 1)])
    witness = is_hyperelementary(H)
    assert check_lemma_hyp_elm(F6, H, 2, 3, witness=witness)[0] in (2, 3)
    with pytest.raises(HypothesisViolated):
        check_lemma_hyp_elm(F6, H, 2, 3, witness=HyperWitness(F6.identity(), 2, 5))


def test_prime_power_lemma_holds_exhaustively(F6):
    checked = 0
    for C in cyclic_subgroups(F6):
        if C.intersection_order == 1:
            with pytest.raises(PreconditionFailed):
                find_lemma_prime_power(F6, C)
            continue
        q, N = find_lemma_prime_power(F6, C)
        assert F6.r % q**N == 0
        assert C.image_order % q**N != 0
        assert C.intersection_order % q == 0
        checked += 1
    assert checked > 0


def test_sampling_is_seeded(F6):
    first = enumerate_hyperelementary(F6, mode="sampling", samples=10, seed=4)
    second = enumerate_hyperelementary(F6, mode="sampling", samples=10, seed=4)
    assert first == second
    assert 0 < len(first) <= 10
    assert len(set(first)) == len(first)
    assert all(is_hyperelementary(H) is not None for H in first)


def test_unknown_enumeration_mode(F6):
    with pytest.raises(PreconditionFailed):
        enumerate_hyperelementary(F6, mode="guess")


def test_normal_form_round_trips_through_parts(F6, hyperelementary_F6):
    for H in hyperelementary_F6[:40]:
        assert subgroup_from_parts(F6, H.lattice, H.j, H.u) == H


def test_conjugation_preserves_order(F6, hyperelementary_F6):
    c = GroupElement((1, 2), 5)
    for H in hyperelementary_F6[:40]:
        K = conjugate_subgroup(H, c)
        assert K.order == H.order
        assert all(K.contains(F6.mul(F6.mul(c, h), F6.inv(c))) for h in H.generators())
