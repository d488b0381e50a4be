"""Tests for the geodesic flow space of R^n."""

import math
import random
from fractions import Fraction

import pytest

from fj_workbench.advanced.flowspace import (
    FlowSpaceParams,
    GeneralizedGeodesic,
    LineCover,
    ball_homotopy_action,
    d_FS,
    d_lambda_upper,
    dfol_check,
    flow,
    iota_R,
    is_gamma_periodic,
    flow_scale_search,
    line_cover,
    rho_R,
)
from fj_workbench.errors import PreconditionFailed

TOL = 1e-6
PARAMS = FlowSpaceParams(2, tolerance=TOL)


def _random_geodesic(rng):
    anchor = (rng.uniform(-3, 3), rng.uniform(-3, 3))
    if rng.random() < 0.3:
        return GeneralizedGeodesic.constant(anchor)
    angle = rng.uniform(0, 2 * math.pi)
    direction = (math.cos(angle), math.sin(angle))
    if rng.random() < 0.5:
        return GeneralizedGeodesic(anchor, direction)
    lo = rng.uniform(-3, 0)
    return GeneralizedGeodesic(anchor, direction, lo, lo + rng.uniform(0.5, 4))


def test_constants_embed_isometrically():
    rng = random.Random(0)
    for _ in range(100):
        x = (rng.uniform(-5, 5), rng.uniform(-5, 5))
        y = (rng.uniform(-5, 5), rng.uniform(-5, 5))
        value = d_FS(GeneralizedGeodesic.constant(x), GeneralizedGeodesic.constant(y), PARAMS)
        assert abs(value - math.dist(x, y)) <= TOL


def test_flow_displacement_bound():
    line = GeneralizedGeodesic.line((0.0, 0.0), (1.0, 0.0))
    segment = iota_R((3.0, 4.0), (0.0, 0.0))
    for tau in (-10.0, -2.5, 0.5, 3.0, 10.0):
        for c in (line, segment):
            assert d_FS(flow(c, tau), c, PARAMS) <= abs(tau) + TOL


def test_triangle_inequality_and_symmetry():
    rng = random.Random(1)
    for _ in range(100):
        a, b, c = _random_geodesic(rng), _random_geodesic(rng), _random_geodesic(rng)
        ab, bc, ac = d_FS(a, b, PARAMS), d_FS(b, c, PARAMS), d_FS(a, c, PARAMS)
        assert ac <= ab + bc + 3 * TOL
        assert ab == pytest.approx(d_FS(b, a, PARAMS), abs=TOL)


def test_flow_composes():
    c = GeneralizedGeodesic((1.0, 2.0), (0.6, 0.8), -1.0, 2.5)
    composed, direct = flow(flow(c, 0.75), 1.5), flow(c, 2.25)
    for t in (-4.0, -1.0, 0.0, 0.3, 2.0, 5.0):
        assert math.dist(composed(t), direct(t)) < 1e-9
    const = GeneralizedGeodesic.constant((1.0, 1.0))
    assert flow(const, 7.0) == const


def test_flow_commutes_with_translations():
    c = GeneralizedGeodesic((1.0, 2.0), (0.6, 0.8), -1.0, 2.5)
    for t in (-2.0, 0.0, 1.0, 3.0):
        assert math.dist(flow(c.translate((3.0, -1.0)), 1.25)(t), flow(c, 1.25).translate((3.0, -1.0))(t)) < 1e-9


def test_geodesic_validation_and_serialization():
    with pytest.raises(PreconditionFailed):
        GeneralizedGeodesic((0.0, 0.0), (2.0, 0.0))
    with pytest.raises(PreconditionFailed):
        GeneralizedGeodesic((0.0, 0.0), (1.0, 0.0), 2.0, 1.0)
    flat = GeneralizedGeodesic((1.0, 1.0), (0.0, 0.0), -3.0, 3.0)
    assert flat.is_constant
    assert (flat.c_minus, flat.c_plus) == (0.0, 0.0)
    line = GeneralizedGeodesic.line((0.0, 0.0), (0.0, 2.0))
    data = line.to_dict()
    assert data["cminus"] == "-inf"
    assert GeneralizedGeodesic.from_dict(data) == line


def test_iota_and_projection():
    x0 = (0.0, 0.0)
    c = iota_R((3.0, 0.0), x0)
    assert c.c_minus == 0.0
    assert c.c_plus == 3.0
    assert c(0.0) == x0
    assert c(3.0) == (3.0, 0.0)
    assert iota_R(x0, x0).is_constant
    assert rho_R((3.0, 4.0), x0, 1.0) == pytest.approx((0.6, 0.8))
    assert rho_R((0.3, 0.4), x0, 1.0) == (0.3, 0.4)


def test_foliated_distance_finds_the_flow_shift():
    c = GeneralizedGeodesic.line((0.0, 0.0), (1.0, 0.0))
    decision = dfol_check(c, flow(c, 1.0), 2.0, 0.1, PARAMS)
    assert decision.holds
    assert decision.witness == pytest.approx(1.0, abs=1e-3)


def test_foliated_distance_rejects_far_constants():
    x, y = GeneralizedGeodesic.constant((0.0, 0.0)), GeneralizedGeodesic.constant((1.0, 0.0))
    assert not dfol_check(x, y, 0.2, 0.5, PARAMS).holds


def test_foliated_distance_rejects_transversal_offset():
    a = GeneralizedGeodesic.line((0.0, 0.0), (1.0, 0.0))
    b = GeneralizedGeodesic.line((0.0, 1.0), (1.0, 0.0))
    assert not dfol_check(a, b, 1.0, 0.5, PARAMS).holds


def test_ball_homotopy_action_bounds():
    S = [(1.0, 0.0), (0.0, 1.0)]
    report = ball_homotopy_action(S, 4.0, relators=[[(0, 1), (0, -1)]], samples=50, seed=3)
    assert report.R == 4.0
    assert 0.0 <= report.max_defect <= 1.0 + 1e-9
    assert report.max_track_diameter <= 1.0 + 1e-9


def test_equivariance_search_passes_on_first_radius():
    report = flow_scale_search([(1.0, 0.0)], 4.0, samples=10, seed=0)
    assert (report.R, report.T) == (4, 2)
    assert report.alpha == 1.0
    assert report.worst_margin <= 0
    assert report.attempts[-1]["passed"]


def test_line_cover_dimension_grows_with_R():
    for R, dimension in ((1, 3), (2, 5)):
        cover, report = line_cover(R, samples=50, seed=0)
        assert report.invariant
        assert report.long_passed
        assert report.dimension == dimension
    assert LineCover(Fraction(2)).is_long_at(Fraction(1, 3))
    with pytest.raises(PreconditionFailed):
        LineCover(Fraction(0))


def test_gamma_periodicity():
    assert is_gamma_periodic(GeneralizedGeodesic.line((0.5, 0.0), (1.0, 0.0)), 1.0)
    slanted = GeneralizedGeodesic.line((0.0, 0.0), (3.0, 4.0))
    assert not is_gamma_periodic(slanted, 4.0)
    assert is_gamma_periodic(slanted, 5.0)
    assert not is_gamma_periodic(GeneralizedGeodesic.constant((0.0, 0.0)), 10.0)
    assert not is_gamma_periodic(iota_R((3.0, 0.0), (0.0, 0.0)), 10.0)


def test_d_lambda_bound_for_flow_translates():
    x = GeneralizedGeodesic.line((0.0, 0.0), (1.0, 0.0))
    y = flow(x, 1.5)
    assert d_lambda_upper(x, y, 10.0, params=PARAMS) <= 1.5
    assert d_lambda_upper(x, flow(x, -0.25), 10.0, params=PARAMS) <= 0.25
    assert d_lambda_upper(x, x, 10.0) == 0.0
