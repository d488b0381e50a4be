"""Tests for geometric modules and controlled morphisms over Z."""

import random
from fractions import Fraction

import pytest

from fj_workbench.base.controlled import (
    ControlledMorphism,
    GeometricModule,
    compose,
    control_of,
    is_eps_automorphism,
    matrix,
    ring_domain,
    shift_morphism,
    support,
    to_fraction,
    translation_control,
)
from fj_workbench.base.group_core import IntegerGroup
from fj_workbench.errors import DimensionMismatch, NotInverse, PreconditionFailed

POSITIONS = {"a": Fraction(0), "b": Fraction(1, 3)}


@pytest.fixture
def module():
    return GeometricModule(IntegerGroup(), {"a": 1, "b": 2}, ring_domain("ZZ"))


def _random_morphism(rng, module):
    blocks = {}
    for _ in range(rng.randint(1, 4)):
        x_to, x_from = rng.choice("ab"), rng.choice("ab")
        rows = [[rng.randint(-2, 2) for _ in range(module.rank(x_from))] for _ in range(module.rank(x_to))]
        blocks[(rng.randint(-3, 3), x_to, x_from)] = matrix(rows, module.domain)
    return ControlledMorphism(module, module, blocks)


def test_shift_controls_add():
    M = GeometricModule(IntegerGroup(), {"x": 1})
    p = translation_control({"x": 0})
    f = shift_morphism(M, 1, "x")
    assert control_of(f, p) == 1
    assert control_of(compose(f, f), p) == 2
    assert support(compose(f, f)) == frozenset({(2, "x", "x")})


def test_control_is_subadditive(module):
    rng = random.Random(2)
    p = translation_control(POSITIONS)
    for _ in range(200):
        f, g = _random_morphism(rng, module), _random_morphism(rng, module)
        assert control_of(compose(f, g), p) <= control_of(f, p) + control_of(g, p)


def test_zero_morphism_has_zero_control(module):
    p = translation_control(POSITIONS)
    assert control_of(ControlledMorphism.zero(module, module), p) == 0
    f = _random_morphism(random.Random(0), module)
    assert (f - f).is_zero


def test_identity_is_neutral(module):
    f = _random_morphism(random.Random(1), module)
    identity = ControlledMorphism.identity(module)
    assert compose(f, identity).equals(f)
    assert compose(identity, f).equals(f)


def test_eps_automorphism():
    M = GeometricModule(IntegerGroup(), {"x": 1})
    p = translation_control({"x": 0})
    forward, backward = shift_morphism(M, 1, "x"), shift_morphism(M, -1, "x")
    assert is_eps_automorphism(forward, backward, p, 1).passed
    report = is_eps_automorphism(forward, backward, p, Fraction(1, 2))
    assert not report.passed
    assert report.control == 1
    with pytest.raises(NotInverse):
        is_eps_automorphism(forward, forward, p, 1)


def test_block_shapes_are_checked(module):
    with pytest.raises(DimensionMismatch):
        ControlledMorphism(module, module, {(0, "a", "b"): matrix([[1, 0], [0, 1]], module.domain)})


def test_rational_and_finite_field_coefficients():
    QQ = ring_domain("QQ")
    assert to_fraction(QQ, matrix([["1/3"]], QQ).to_list()[0][0]) == Fraction(1, 3)
    GF5 = ring_domain("GF(5)")
    M = GeometricModule(IntegerGroup(), {"x": 1}, GF5)
    f = ControlledMorphism(M, M, {(0, "x", "x"): matrix([[5]], GF5)})
    assert f.is_zero
    with pytest.raises(PreconditionFailed):
        ring_domain("RR")
