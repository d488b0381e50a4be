"""Tests for the line map, the cover maps and the induced coset maps."""

import random
from fractions import Fraction

import pytest

from fj_workbench.advanced.certifier import standard_generators
from fj_workbench.advanced.contracting import (
    BoxCover,
    CosetMap,
    SlabCover,
    assemble_coset_map,
    build_prop_Z,
    build_prop_Zn,
    check_cover_invariance,
    letters,
    minimal_line_scale,
    search_prop_Zn,
)
from fj_workbench.base.group_core import GeneratingSet, GroupElement, IntMatrix, SemidirectProduct
from fj_workbench.base.simplicial import l1_distance
from fj_workbench.errors import ContractionFailed, PreconditionFailed, SearchBudgetExceeded

CAT = IntMatrix.from_rows([[2, 1], [1, 1]])
HALF = Fraction(1, 2)
S = standard_generators(2)


@pytest.fixture(scope="module")
def G():
    return SemidirectProduct(CAT)


@pytest.fixture(scope="module")
def slab_map(G):
    return build_prop_Zn(G, 11, S, HALF, "slab", 4)


@pytest.fixture(scope="module")
def box_map(G):
    return build_prop_Zn(G, 31, S, HALF, "box", 4, 1)


def test_letters_include_inverses(G):
    assert len(letters(G, S)) == 6
    assert GroupElement((0, 0), -1) in letters(G, S)


def test_minimal_line_scale():
    assert minimal_line_scale(S, HALF) == 4
    assert minimal_line_scale(S, Fraction(1, 10)) == 20
    flat = GeneratingSet((GroupElement((1, 0), 0),))
    assert minimal_line_scale(flat, HALF) == 1


def test_line_map_meets_eps_at_minimal_scale(G):
    F = build_prop_Z(G, 4, S, HALF, samples=300)
    assert F.report["passed"]
    assert F.report["bound"] == "1/2"
    assert F.report["bound_per_letter"] == {"0": "0", "1": "1/2", "-1": "1/2"}
    assert F.report["pairs_checked"] == 4 * 6
    assert F.report["isotropy_family"] == "abelian"
    coarse = build_prop_Z(G, 3, S, HALF, samples=50).report
    assert not coarse["passed"]
    assert coarse["bound"] == "2/3"


def test_line_map_distances_against_closed_form(G):
    F = build_prop_Z(G, 4, S, HALF, samples=10)
    rng = random.Random(4)
    for _ in range(1000):
        g = GroupElement((rng.randint(-3, 3), rng.randint(-3, 3)), rng.randint(-40, 40))
        h = GroupElement((rng.randint(-3, 3), rng.randint(-3, 3)), rng.randint(-40, 40))
        assert l1_distance(F(g), F(h)) <= min(Fraction(2), Fraction(2 * abs(g.k - h.k), 4))


def test_line_map_rejects_bad_scale(G):
    with pytest.raises(PreconditionFailed):
        build_prop_Z(G, 0, S, HALF)


def test_slab_cover_map(slab_map):
    report = slab_map.report
    assert report["passed"]
    assert report["pairs_checked"] == 121 * 6
    assert report["worst"] == "1/2"
    assert report["isotropy_family"] == "abelian"
    assert not report["in_cyc"]
    assert report["dimension"] == 6


def test_box_cover_map_has_trivial_isotropy(box_map):
    report = box_map.report
    assert report["passed"]
    assert report["pairs_checked"] == 961 * 6
    assert report["worst"] == "3441/7930"
    assert report["isotropy_family"] == "trivial"
    assert report["in_cyc"]
    assert report["cover"] == {"kind": "box", "R": 4, "W": "1", "rho": "1/2"}


def test_thin_slabs_fail_with_the_worst_pair(G):
    with pytest.raises(ContractionFailed) as info:
        build_prop_Zn(G, 11, S, HALF, "slab", 2)
    assert "pair" in info.value.details
    assert info.value.details["cover"]["kind"] == "slab"


def test_search_prefers_box_covers(G):
    F = search_prop_Zn(G, 31, S, HALF)
    report = F.report
    assert F.kind == "box"
    assert report["isotropy_family"] == "trivial"
    assert report["in_cyc"]
    assert not report["fallback"]
    assert report["cover"]["R"] <= 4
    assert report["pairs_checked"] == 961 * 6
    assert Fraction(report["worst"]) <= HALF
    assert all(attempt["kind"] == "box" for attempt in report["attempts"])


def test_search_falls_back_to_flagged_slabs(G):
    F = search_prop_Zn(G, 11, S, HALF, radii=(1,), weights=(1,))
    report = F.report
    assert F.kind == "slab"
    assert report["fallback"]
    assert not report["in_cyc"]
    assert report["isotropy_family"] == "abelian"
    assert report["cover"] == {"kind": "slab", "R": 4}
    assert [a["kind"] for a in report["attempts"]] == ["box", "slab", "slab"]


def test_search_without_slabs_reports_every_box_attempt(G):
    with pytest.raises(SearchBudgetExceeded) as info:
        search_prop_Zn(G, 11, S, HALF, radii=(1, 2), weights=(1, 2), slab_fallback=False)
    attempts = info.value.details["attempts"]
    assert [(a["R"], a["W"]) for a in attempts] == [(1, "1"), (1, "2"), (2, "1"), (2, "2")]


def test_covers_are_invariant(G):
    assert check_cover_invariance(G, BoxCover(CAT, 2, Fraction(1)), samples=50)
    assert check_cover_invariance(G, SlabCover(3), samples=50)


def test_cover_map_is_equivariant(G, slab_map):
    rng = random.Random(8)
    for _ in range(50):
        g = GroupElement((rng.randint(-20, 20), rng.randint(-20, 20)), rng.randint(-5, 5))
        h = GroupElement((11 * rng.randint(-2, 2), 11 * rng.randint(-2, 2)), rng.randint(-3, 3))
        assert slab_map(G.mul(h, g)) == slab_map(g).relabel(lambda key: slab_map.fiber_action(h, key))


def test_box_cover_map_is_equivariant(G, box_map):
    rng = random.Random(9)
    for _ in range(30):
        g = GroupElement((rng.randint(-40, 40), rng.randint(-40, 40)), rng.randint(-3, 3))
        h = GroupElement((31 * rng.randint(-2, 2), 31 * rng.randint(-2, 2)), rng.randint(-2, 2))
        assert box_map(G.mul(h, g)) == box_map(g).relabel(lambda key: box_map.fiber_action(h, key))


def test_coset_map_for_the_line_case(G):
    built = build_prop_Z(G, 4, S, HALF, samples=50)
    f = assemble_coset_map(G, built.subgroup, built, S, HALF, samples=20)
    assert Fraction(f.report["worst_equivariance"]) <= HALF
    assert f.report["descent_checked"] == 20


def test_coset_map_with_conjugation(G, slab_map):
    H = G.normal_form([GroupElement((1, 0), 1), GroupElement((11, 0), 0), GroupElement((0, 11), 0)])
    f = assemble_coset_map(G, H, slab_map, S, HALF, conjugator=(0, 10), samples=20)
    assert f.report["conjugator"] == ["0", "10"]
    assert Fraction(f.report["worst_equivariance"]) <= HALF

    unconjugated = CosetMap(G, slab_map, f.induced, G.identity())
    assert unconjugated(GroupElement((1, 0), 1)) != unconjugated(G.identity())
