"""Tests for simplicial complexes, the l1-metric, nerves and induced complexes."""

import random
from fractions import Fraction

import pytest

from fj_workbench.base.group_core import GroupElement, IntMatrix, SemidirectProduct, Subgroup
from fj_workbench.base.simplicial import (
    FamilyTag,
    FiniteSetCover,
    IntervalCover,
    LineComplex,
    SimplicialAction,
    SimplicialComplex,
    SPoint,
    classify_subgroup,
    fixed_simplex,
    in_family,
    induce,
    l1_distance,
    nerve,
    pou_map,
    subdivide,
)
from fj_workbench.errors import NoCover, OrbitNotSimplex, PreconditionFailed

CAT = IntMatrix.from_rows([[2, 1], [1, 1]])
ROTATION = SimplicialAction.from_permutations({"r": {"a": "b", "b": "c", "c": "a"}})


def test_subdivided_triangle_counts():
    triangle = SimplicialComplex.from_maximal([("a", "b", "c")])
    sd = subdivide(triangle)
    assert len(sd.faces_of_dim(0)) == 7
    assert len(sd.faces_of_dim(1)) == 12
    assert len(sd.faces_of_dim(2)) == 6
    assert sd.dimension == 2


def test_points_and_l1_distance():
    a, b = SPoint.vertex("a"), SPoint.vertex("b")
    assert l1_distance(a, b) == 2
    assert l1_distance(a, a) == 0
    mid = SPoint.from_weights({"a": Fraction(1, 2), "b": Fraction(1, 2), "c": 0})
    assert mid == SPoint.barycenter(["b", "a"])
    assert l1_distance(a, mid) == 1


def test_invalid_barycentric_weights():
    with pytest.raises(PreconditionFailed):
        SPoint.from_weights({"a": Fraction(3, 2), "b": Fraction(-1, 2)})
    with pytest.raises(PreconditionFailed):
        SPoint.from_weights({"a": Fraction(1, 2)})


def test_line_complex_points():
    line = LineComplex()
    assert line.coordinate(line.point(Fraction(5, 2))) == Fraction(5, 2)
    assert line.point(3) == SPoint.vertex(3)
    assert l1_distance(line.point(0), line.point(Fraction(1, 4))) == Fraction(1, 2)
    assert line.is_simplex([4, 5])
    assert not line.is_simplex([4, 6])
    assert line.window(0, 3).dimension == 1


def test_rotation_is_simplicial_and_fixes_the_barycenter():
    triangle = SimplicialComplex.from_maximal([("a", "b", "c")])
    assert ROTATION.is_simplicial(triangle)
    center = SPoint.barycenter("abc")
    assert fixed_simplex(ROTATION, triangle, [("r", 1)], center, 2) == center


def test_fixed_simplex_needs_a_small_move():
    triangle = SimplicialComplex.from_maximal([("a", "b", "c")])
    with pytest.raises(PreconditionFailed):
        fixed_simplex(ROTATION, triangle, [("r", 1)], SPoint.vertex("a"), 2)


def test_fixed_simplex_on_hollow_triangle():
    hollow = SimplicialComplex.from_maximal([("a", "b"), ("b", "c"), ("c", "a")])
    with pytest.raises(OrbitNotSimplex):
        fixed_simplex(ROTATION, hollow, [("r", 1)], SPoint.barycenter("abc"), 2)


def test_nerve_of_interval_cover():
    cover = IntervalCover({"a": (Fraction(0), Fraction(2)), "b": (Fraction(1), Fraction(3)), "c": (Fraction(5, 2), Fraction(4))})
    N = nerve(cover)
    assert N.is_simplex(["a", "b"])
    assert N.is_simplex(["b", "c"])
    assert not N.is_simplex(["a", "c"])
    assert N.dimension == 1


def test_nerve_of_three_cycle_is_hollow():
    cover = FiniteSetCover({"a": frozenset({1, 2}), "b": frozenset({2, 3}), "c": frozenset({3, 1})})
    N = nerve(cover)
    assert len(N.faces_of_dim(1)) == 3
    assert N.faces_of_dim(2) == []
    assert N.dimension == 1


def test_partition_of_unity_map():
    cover = IntervalCover({"a": (Fraction(0), Fraction(2)), "b": (Fraction(1), Fraction(3))})
    z = pou_map(cover, Fraction(3, 2))
    assert z.weights == {"a": Fraction(1, 2), "b": Fraction(1, 2)}
    assert pou_map(cover, Fraction(1, 2)) == SPoint.vertex("a")
    with pytest.raises(NoCover):
        pou_map(cover, Fraction(10))


def test_classify_subgroup():
    G = SemidirectProduct(CAT)
    assert classify_subgroup(G, Subgroup(2, ())) == FamilyTag.TRIVIAL
    assert classify_subgroup(G, Subgroup(2, (), ((0, 0), 3))) == FamilyTag.CYCLIC
    assert classify_subgroup(G, Subgroup(2, ((1, 0), (0, 1)))) == FamilyTag.ABELIAN
    assert classify_subgroup(G, Subgroup(2, ((1, 0), (0, 1)), ((0, 0), 1))) == FamilyTag.OTHER
    flat = SemidirectProduct(IntMatrix.identity(2))
    assert classify_subgroup(flat, Subgroup(2, ((1, 0), (0, 1)), ((0, 0), 1))) == FamilyTag.ABELIAN
    shear = SemidirectProduct(IntMatrix.from_rows([[1, 1], [0, 1]]))
    assert classify_subgroup(shear, Subgroup(2, ((1, 0),), ((0, 0), 1))) == FamilyTag.ABELIAN
    assert classify_subgroup(shear, Subgroup(2, ((0, 1),), ((0, 0), 1))) == FamilyTag.OTHER
    assert classify_subgroup(G, Subgroup(2, (), ((1, 0), 2))) == FamilyTag.CYCLIC


def test_family_membership():
    assert in_family(FamilyTag.TRIVIAL, "Fin")
    assert in_family(FamilyTag.CYCLIC, "VCyc")
    assert not in_family(FamilyTag.ABELIAN, "VCyc")
    assert not in_family(FamilyTag.OTHER, "Ab")
    assert in_family(FamilyTag.OTHER, "All")


@pytest.fixture
def induced_line():
    G = SemidirectProduct(CAT)
    H = Subgroup(2, ((1, 0), (0, 1)), ((0, 0), 2))
    return G, induce(G, H, LineComplex(), lambda h, e: e + h.k // 2)


def _random_element(rng, lo=-4, hi=4):
    return GroupElement.make((rng.randint(lo, hi), rng.randint(lo, hi)), rng.randint(-3, 3))


def test_induced_complex_is_well_defined(induced_line):
    G, X = induced_line
    rng = random.Random(5)
    samples = []
    for _ in range(50):
        h = GroupElement.make((rng.randint(-4, 4), rng.randint(-4, 4)), 2 * rng.randint(-2, 2))
        samples.append((_random_element(rng), h, LineComplex().point(Fraction(rng.randint(-20, 20), 7))))
    assert X.well_defined_on(samples)


def test_induced_action_is_an_action(induced_line):
    G, X = induced_line
    rng = random.Random(9)
    for _ in range(30):
        g1, g2, g = _random_element(rng), _random_element(rng), _random_element(rng)
        z = X.point(g, LineComplex().point(Fraction(rng.randint(-10, 10), 3)))
        assert X.act(g1, X.act(g2, z)) == X.act(G.mul(g1, g2), z)
        assert X.act(G.identity(), z) == z
