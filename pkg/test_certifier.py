"""Tests for the case split, the number theory of the pipeline and certificates."""

import copy
import json
from fractions import Fraction

import pytest

from fj_workbench.advanced.certifier import (
    CaseKind,
    SLAB_NOTE,
    CertRequest,
    barH_conjugator,
    barH_hypothesis,
    case_threshold,
    classify_preimage,
    number_theory,
    pipeline,
    preimage,
    standard_generators,
    verify_certificate,
)
from fj_workbench.base.group_core import (
    FiniteQuotientDesc,
    GroupElement,
    IntMatrix,
    SemidirectProduct,
    Subgroup,
)
from fj_workbench.base.hyperelementary import PreimageCondition, check_lemma_hyp_elm, closure
from fj_workbench.errors import (
    EigenvalueRootOfUnity,
    HypothesisViolated,
    InconsistentData,
    PreconditionFailed,
)

CAT = IntMatrix.from_rows([[2, 1], [1, 1]])
HALF = Fraction(1, 2)
S = standard_generators(2)


@pytest.fixture(scope="module")
def G():
    return SemidirectProduct(CAT)


@pytest.fixture(scope="module")
def F():
    return FiniteQuotientDesc.for_matrix(CAT, 341, 5115)


@pytest.fixture(scope="module")
def certificate():
    req = CertRequest(CAT, 2, HALF, S, mode="sampling", samples=3, seed=0)
    return json.loads(json.dumps(pipeline(req).to_dict()))


def test_number_theory():
    nt = number_theory(CertRequest(CAT, 2, HALF, S))
    assert nt.i_k == [1, 5]
    assert nt.K == 5
    assert nt.primes == (11, 31)
    assert nt.s == 341
    assert nt.A_s_order == 15
    assert nt.r == 5115


def test_root_of_unity_is_refused():
    shear = IntMatrix.from_rows([[1, 1], [0, 1]])
    with pytest.raises(EigenvalueRootOfUnity) as info:
        number_theory(CertRequest(shear, 2, HALF, S))
    assert info.value.exit_code == 1


def test_case_threshold():
    assert case_threshold(2, S, HALF) == 3
    assert case_threshold(10, S, HALF) == 10


def test_request_validation():
    with pytest.raises(PreconditionFailed):
        CertRequest(CAT, 2, 0, S)
    with pytest.raises(PreconditionFailed):
        CertRequest(CAT, 0, HALF, S)
    with pytest.raises(PreconditionFailed):
        CertRequest(CAT, 2, HALF, S, mode="guess")
    with pytest.raises(PreconditionFailed):
        CertRequest(CAT, 2, HALF, standard_generators(3))
    with pytest.raises(InconsistentData):
        CertRequest.from_dict({"A": {"rows": [[2, 1], [1, 1]]}, "eps": "1/2"})


def test_request_survives_serialization():
    req = CertRequest(CAT, 3, Fraction(1, 3), S, samples=7, seed=5)
    again = CertRequest.from_dict(json.loads(json.dumps(req.to_dict())))
    assert again.to_dict() == req.to_dict()


def test_index_hypothesis_forms():
    assert barH_hypothesis(CAT, 1, 7) == "congruence"
    assert barH_hypothesis(CAT, 2, 11) == "congruence"
    assert barH_hypothesis(CAT, 3, 11) == "coprime"
    assert barH_hypothesis(CAT, 2, 5) is None


def test_conjugator_for_the_first_power(G):
    H = G.normal_form([GroupElement((1, 0), 1), GroupElement((11, 0), 0), GroupElement((0, 11), 0)])
    w = barH_conjugator(H, 11, 1, CAT, strict=True)
    assert w == (0, 10)
    c = GroupElement(w, 0)
    for g in G.generators(H):
        assert all(a % 11 == 0 for a in G.conjugate(G.inv(c), g).v)


def test_coprime_conjugator_needs_relaxed_hypothesis():
    H = Subgroup(2, ((11, 0), (0, 11)), ((1, 0), 3))
    with pytest.raises(HypothesisViolated) as info:
        barH_conjugator(H, 11, 3, CAT, strict=True)
    assert info.value.details["clause"] == "index"
    assert len(barH_conjugator(H, 11, 3, CAT)) == 2


@pytest.mark.parametrize(
    "H, l, k, clause",
    [
        (Subgroup(2, ((5, 0), (0, 5)), ((1, 0), 2)), 5, 2, "index"),
        (Subgroup(2, ((1, 0), (0, 1)), ((0, 0), 1)), 11, 1, "lattice"),
        (Subgroup(2, ((11, 0), (0, 11)), ((1, 0), 2)), 11, 1, "image"),
    ],
)
def test_conjugator_hypothesis_clauses(H, l, k, clause):
    with pytest.raises(HypothesisViolated) as info:
        barH_conjugator(H, l, k, CAT)
    assert info.value.details["clause"] == clause


def test_image_inside_prime_uses_line_map(G, F):
    H = closure(F, [GroupElement((0, 0), 11)])
    q, condition = check_lemma_hyp_elm(F, H, 11, 31)
    assert (q, condition) == (11, PreimageCondition.BOTH)
    case = classify_preimage(H, q, condition, G, 3)
    assert case.kind == CaseKind.SUBGROUP_OF_ZN_SEMIDIRECT_QZ
    assert case.construction_id == "line:l=11"


def test_large_image_uses_line_map(G, F):
    H = closure(F, [GroupElement((0, 0), 5)])
    q, condition = check_lemma_hyp_elm(F, H, 11, 31)
    assert (q, condition) == (11, PreimageCondition.LATTICE)
    assert preimage(G, H).slope == ((0, 0), 5)
    case = classify_preimage(H, q, condition, G, 3)
    assert case.kind == CaseKind.LATTICE_SEMIDIRECT_DIRECT
    assert case.l == 5


def test_small_image_is_conjugated_into_the_cover_subgroup(G, F):
    H = closure(F, [GroupElement((1, 0), 1)])
    assert H.j == 1
    q, condition = check_lemma_hyp_elm(F, H, 11, 31)
    assert condition == PreimageCondition.LATTICE
    case = classify_preimage(H, q, condition, G, 3)
    assert case.kind == CaseKind.CONJUGATE_INTO_LATTICE_SEMIDIRECT
    assert case.conjugator == (0, 10)
    assert case.hypothesis == "congruence"
    assert case.construction_id == "cover:q=11"


def test_pipeline_certificate(certificate):
    assert certificate["status"] == "PASSED"
    assert certificate["primes"] == ["11", "31"]
    assert certificate["r"] == "5115"
    assert certificate["threshold"] == "3"
    assert 1 <= len(certificate["subgroups"]) <= 3
    for record in certificate["subgroups"]:
        assert record["passed"]
        assert record["construction"] in certificate["constructions"]
        assert Fraction(record["margins"]["coset_worst"]) <= HALF
        assert record["isotropy_family"] in ("trivial", "abelian")
        if record["case"]["kind"] == CaseKind.CONJUGATE_INTO_LATTICE_SEMIDIRECT.value:
            assert record["case"]["hypothesis"] in ("congruence", "coprime")
    fallbacks = [c for c in certificate["constructions"].values() if c.get("fallback")]
    assert all(not c["in_cyc"] for c in fallbacks)
    assert (SLAB_NOTE in certificate["deviations"]) == bool(fallbacks)


def test_certificate_verifies(certificate):
    report = verify_certificate(certificate)
    assert report.passed
    assert report.checked == len(certificate["subgroups"])
    assert report.mismatches == []


def test_tampered_certificate_is_caught(certificate):
    doc = copy.deepcopy(certificate)
    doc["r"] = "5116"
    report = verify_certificate(doc)
    assert not report.passed
    assert any(m.get("field") == "r" for m in report.mismatches)

    doc = copy.deepcopy(certificate)
    record = doc["subgroups"][0]
    record["q"] = "31" if record["q"] == "11" else "11"
    assert not verify_certificate(doc).passed

    doc = copy.deepcopy(certificate)
    doc["subgroups"][0]["isotropy_family"] = "cyclic"
    report = verify_certificate(doc)
    assert not report.passed
    assert any(m.get("field") == "isotropy_family" for m in report.mismatches)


def test_unknown_schema():
    with pytest.raises(InconsistentData):
        verify_certificate({"schema": "something-else"})
