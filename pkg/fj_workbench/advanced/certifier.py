"""End-to-end Farrell-Hsiang pipeline for Z^n semidirect_A Z.

For a twisting matrix A, a window length L and a target eps, the pipeline
picks two primes p1, p2 = 1 mod K = i_1 ... i_L, forms the finite quotient
F = (Z/s)^n semidirect Z/r with s = p1 p2 and r = s |A_s|, and for every
(enumerated or sampled) hyper-elementary subgroup H of F

1. finds q in {p1, p2} for which the preimage of H lies in (qZ)^n or maps into qZ,
2. classifies the preimage into one of three cases,
3. builds the matching contracting map and checks it exactly,
4. induces it to the coset space and checks descent and eps-equivariance.

Everything lands in a JSON certificate that ``verify_certificate`` replays.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import gcd, prod
from typing import Any, Dict, List, Optional, Tuple

from sympy import Matrix, eye

from fj_workbench.advanced.contracting import (
    assemble_coset_map,
    build_prop_Z,
    minimal_line_scale,
    search_prop_Zn,
)
from fj_workbench.base.group_core import (
    FiniteQuotientDesc,
    GeneratingSet,
    GroupElement,
    IntMatrix,
    SemidirectProduct,
    Subgroup,
    Vector,
    dirichlet_primes,
    has_root_of_unity_eigenvalue,
    index_ik,
    matrix_order_mod,
)
from fj_workbench.base.hyperelementary import (
    FiniteSubgroup,
    HyperWitness,
    PreimageCondition,
    check_lemma_hyp_elm,
    enumerate_hyperelementary,
    is_hyperelementary,
    subgroup_from_parts,
    verify_witness,
)
from fj_workbench.config import WorkbenchConfig
from fj_workbench.errors import (
    ClassificationFailed,
    ContractionFailed,
    DescentFailed,
    EigenvalueRootOfUnity,
    EquivarianceFailed,
    HypothesisViolated,
    InconsistentData,
    PreconditionFailed,
    SearchBudgetExceeded,
    WorkbenchError,
)

logger = logging.getLogger("fjwb.certifier")

SCHEMA_VERSION = "fjwb-certificate/1"
COSET_BALL_RADIUS = 2
COSET_SAMPLES = 20
DIMENSION_NOTE = (
    "Cover maps use explicit box or slab covers of R^n x R whose nerve "
    "dimension grows with R, hence with 1/eps; the dimension is measured, "
    "not bounded uniformly in eps."
)
SLAB_NOTE = (
    "Some cover maps fell back to slab covers, whose vertex stabilizers are "
    "(qZ)^n: abelian, not cyclic. Their isotropy is recorded per construction."
)


def standard_generators(n: int) -> GeneratingSet:
    """{e_1, ..., e_n, t}."""
    gens = [GroupElement(tuple(int(i == j) for j in range(n)), 0) for i in range(n)]
    return GeneratingSet(tuple(gens) + (GroupElement((0,) * n, 1),))


@dataclass
class CertRequest:
    """Inputs of one pipeline run."""

    A: IntMatrix
    L: int
    eps: Fraction
    S: GeneratingSet
    mode: str = "sampling"
    samples: int = 100
    seed: int = 0
    subgroup_cap: int = 20_000
    prime_candidate_cap: int = 1_000_000

    def __post_init__(self) -> None:
        self.eps = Fraction(self.eps)
        if self.eps <= 0:
            raise PreconditionFailed(f"eps must be positive, got {self.eps}")
        if self.L < 1:
            raise PreconditionFailed(f"L must be at least 1, got {self.L}")
        if self.mode not in ("exhaustive", "sampling"):
            raise PreconditionFailed(f"Unknown mode {self.mode!r}")
        if any(len(g.v) != self.A.n for g in self.S.elements):
            raise PreconditionFailed("Generating set does not match the matrix dimension")

    @classmethod
    def from_config(
        cls, A: IntMatrix, L: int, eps: Any, S: Optional[GeneratingSet], config: WorkbenchConfig, **overrides: Any
    ) -> "CertRequest":
        values = {
            "mode": "sampling",
            "samples": config.samples,
            "seed": config.seed,
            "subgroup_cap": config.subgroup_cap,
            "prime_candidate_cap": config.prime_candidate_cap,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(A, L, Fraction(eps), S or standard_generators(A.n), **values)

    def to_dict(self) -> dict:
        return {
            "A": self.A.to_dict(),
            "L": str(self.L),
            "eps": str(self.eps),
            "S": [g.to_dict() for g in self.S.elements],
            "mode": self.mode,
            "samples": str(self.samples),
            "seed": str(self.seed),
            "subgroup_cap": str(self.subgroup_cap),
            "prime_candidate_cap": str(self.prime_candidate_cap),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CertRequest":
        try:
            S = GeneratingSet(
                tuple(GroupElement.make((int(x) for x in g["v"]), int(g["k"])) for g in data["S"])
            )
            return cls(
                IntMatrix.from_rows(data["A"]["rows"]),
                int(data["L"]),
                Fraction(data["eps"]),
                S,
                data.get("mode", "sampling"),
                int(data.get("samples", 100)),
                int(data.get("seed", 0)),
                int(data.get("subgroup_cap", 20_000)),
                int(data.get("prime_candidate_cap", 1_000_000)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InconsistentData(f"Malformed certificate request: {e}") from e


class CaseKind(str, Enum):
    SUBGROUP_OF_ZN_SEMIDIRECT_QZ = "SubgroupOfZnSemidirectqZ"
    CONJUGATE_INTO_LATTICE_SEMIDIRECT = "ConjugateIntoLatticeSemidirect"
    LATTICE_SEMIDIRECT_DIRECT = "LatticeSemidirectDirect"


@dataclass(frozen=True)
class CaseTag:
    """Which contracting map serves a preimage, with the data that proves the fit."""

    kind: CaseKind
    q: Optional[int] = None
    l: Optional[int] = None
    conjugator: Optional[Vector] = None
    hypothesis: Optional[str] = None

    @property
    def construction_id(self) -> str:
        if self.kind == CaseKind.CONJUGATE_INTO_LATTICE_SEMIDIRECT:
            return f"cover:q={self.q}"
        return f"line:l={self.l}"

    def to_dict(self) -> dict:
        out: Dict[str, Any] = {"kind": self.kind.value}
        if self.q is not None:
            out["q"] = str(self.q)
        if self.l is not None:
            out["l"] = str(self.l)
        if self.conjugator is not None:
            out["conjugator"] = [str(x) for x in self.conjugator]
        if self.hypothesis is not None:
            out["hypothesis"] = self.hypothesis
        return out


def preimage(G: SemidirectProduct, H: FiniteSubgroup) -> Subgroup:
    """Normal form of pi^-1(H) in G, generated by lifts of H and the kernel of pi."""
    F = H.parent
    gens = [GroupElement(tuple(F.s * int(i == j) for j in range(F.n)), 0) for i in range(F.n)]
    gens.append(GroupElement((0,) * F.n, F.r))
    gens.extend(GroupElement(tuple(row), 0) for row in H.lattice)
    if H.j != F.r:
        gens.append(GroupElement(H.u, H.j))
    return G.normal_form(gens)


def case_threshold(L: int, S: GeneratingSet, eps: Any) -> int:
    """Images in lZ with l above this go straight to the line map.

    The case split needs L at least as large as the least line scale that
    meets eps; a smaller requested L is raised to it.
    """
    return max(L, minimal_line_scale(S, Fraction(eps)) - 1)


def barH_hypothesis(A: IntMatrix, k: int, l: int) -> Optional[str]:
    """Which form of the index hypothesis holds for (k, l), if any.

    ``congruence`` is l = 1 mod i_k; ``coprime`` is the weaker gcd(i_k, l) = 1,
    which is exactly what the modular solve for w needs.
    """
    i = index_ik(A, k)
    if i == 0:
        return None
    if l % i == 1 % i:
        return "congruence"
    if gcd(i, l) == 1:
        return "coprime"
    return None


def barH_conjugator(H: Subgroup, l: int, k: int, A: IntMatrix, strict: bool = False) -> Vector:
    """Vector w with w^-1 H w inside (lZ)^n semidirect Z.

    Solves (I - A^k) w = v mod l for the generator v t^k of H, then checks
    the conjugation on every generator.

    Args:
        H: Subgroup with H n Z^n in (lZ)^n and image kZ.
        l: Lattice modulus.
        k: Exponent of the image generator.
        A: Twisting matrix.
        strict: Require l = 1 mod i_k instead of gcd(i_k, l) = 1.

    Raises:
        HypothesisViolated: Naming the failing clause.
    """
    G = SemidirectProduct(A)
    if any(a % l for row in H.lattice for a in row):
        raise HypothesisViolated(f"Lattice part is not inside ({l}Z)^n", {"clause": "lattice"})
    if H.slope is None:
        return (0,) * A.n
    if H.slope[1] != k:
        raise HypothesisViolated(
            f"Image is {H.slope[1]}Z, not {k}Z", {"clause": "image"}
        )
    form = barH_hypothesis(A, k, l)
    if form is None or (strict and form != "congruence"):
        raise HypothesisViolated(
            f"Index hypothesis fails: l={l}, i_{k}={index_ik(A, k)}",
            {"clause": "index", "i_k": str(index_ik(A, k)), "l": str(l)},
        )
    M = eye(A.n) - A.power(k).to_sympy()
    v = Matrix(H.slope[0])
    w = tuple(int(x) % l for x in (M.inv_mod(l) * v))
    w_elem = GroupElement(w, 0)
    for g in G.generators(H):
        moved = G.conjugate(G.inv(w_elem), g)
        if any(a % l for a in moved.v):
            raise InconsistentData(f"Conjugation by {w} leaves {moved} outside ({l}Z)^n")
    logger.debug(f"barH conjugator for l={l}, k={k}: w={w}")
    return w


def classify_preimage(
    H: FiniteSubgroup,
    q: int,
    condition: PreimageCondition,
    G: SemidirectProduct,
    threshold: int,
) -> CaseTag:
    """Place pi^-1(H) under one of the three contracting maps.

    Image in qZ: the line map with l = q. Lattice in (qZ)^n and image in jZ
    with j above ``threshold``: the line map with l = j. Otherwise the
    preimage is conjugated into (qZ)^n semidirect Z and the cover map serves.
    The trivial subgroup satisfies both conditions for p1 and is tagged
    SubgroupOfZnSemidirectqZ(p1).

    Raises:
        ClassificationFailed: If no case applies.
    """
    pre = preimage(G, H)
    if condition in (PreimageCondition.IMAGE, PreimageCondition.BOTH) or pre.slope is None:
        if pre.slope is not None and pre.slope[1] % q:
            raise ClassificationFailed(f"Preimage image {pre.slope[1]}Z is not inside {q}Z")
        return CaseTag(CaseKind.SUBGROUP_OF_ZN_SEMIDIRECT_QZ, q=q, l=q)
    if any(a % q for row in pre.lattice for a in row):
        raise ClassificationFailed(f"Preimage lattice is not inside ({q}Z)^n")
    j = pre.slope[1]
    if j > threshold:
        return CaseTag(CaseKind.LATTICE_SEMIDIRECT_DIRECT, l=j)
    try:
        w = barH_conjugator(pre, q, j, G.A)
    except HypothesisViolated as e:
        raise ClassificationFailed(
            f"No case applies to {H.to_dict()}: {e.message}", {"subgroup": H.to_dict(), **e.details}
        ) from e
    return CaseTag(
        CaseKind.CONJUGATE_INTO_LATTICE_SEMIDIRECT, q=q, conjugator=w, hypothesis=barH_hypothesis(G.A, j, q)
    )


@dataclass
class Certificate:
    """Record of one pipeline run; ``status`` is PASSED only if every subgroup passed."""

    request: CertRequest
    i_k: List[int]
    K: int
    primes: Tuple[int, int]
    s: int
    A_s_order: int
    r: int
    threshold: int
    subgroups: List[dict] = field(default_factory=list)
    constructions: Dict[str, dict] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "PASSED" if self.subgroups and all(r["passed"] for r in self.subgroups) else "FAILED"

    @property
    def deviations(self) -> List[str]:
        notes = [DIMENSION_NOTE]
        if any(c.get("fallback") for c in self.constructions.values()):
            notes.append(SLAB_NOTE)
        return notes

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "status": self.status,
            "request": self.request.to_dict(),
            "i_k": [str(i) for i in self.i_k],
            "K": str(self.K),
            "primes": [str(p) for p in self.primes],
            "s": str(self.s),
            "A_s_order": str(self.A_s_order),
            "r": str(self.r),
            "threshold": str(self.threshold),
            "subgroups": self.subgroups,
            "constructions": self.constructions,
            "deviations": self.deviations,
            "timings": {k: round(v, 4) for k, v in self.timings.items()},
            "seed": str(self.request.seed),
        }


@dataclass
class NumberTheory:
    i_k: List[int]
    K: int
    primes: Tuple[int, int]
    s: int
    A_s_order: int
    r: int


def number_theory(req: CertRequest) -> NumberTheory:
    """i_k for k <= L, K, the two primes, s, |A_s| and r.

    Raises:
        EigenvalueRootOfUnity: If A has a root-of-unity eigenvalue.
        PrimeSearchExhausted: If the prime search hits its cap.
    """
    if has_root_of_unity_eigenvalue(req.A):
        raise EigenvalueRootOfUnity(f"Matrix {req.A.to_dict()['rows']} has a root-of-unity eigenvalue")
    i_k = [index_ik(req.A, k) for k in range(1, req.L + 1)]
    if 0 in i_k:
        raise EigenvalueRootOfUnity("Some i_k vanishes")
    K = prod(i_k)
    p1, p2 = dirichlet_primes(K, max(req.L, 2), 2, req.prime_candidate_cap)
    s = p1 * p2
    order = matrix_order_mod(req.A, s)
    return NumberTheory(i_k, K, (p1, p2), s, order, s * order)


class MapCache:
    """Contracting maps keyed by construction id; each is built and checked once."""

    def __init__(self, G: SemidirectProduct, S: GeneratingSet, eps: Fraction, seed: int):
        self.G, self.S, self.eps, self.seed = G, S, eps, seed
        self.maps: Dict[str, Any] = {}
        self.failures: Dict[str, WorkbenchError] = {}

    def get(self, case: CaseTag) -> Any:
        key = case.construction_id
        if key in self.failures:
            raise self.failures[key]
        if key not in self.maps:
            try:
                if case.kind == CaseKind.CONJUGATE_INTO_LATTICE_SEMIDIRECT:
                    built = search_prop_Zn(self.G, case.q, self.S, self.eps)
                else:
                    built = build_prop_Z(self.G, case.l, self.S, self.eps, samples=200, seed=self.seed)
                    if not built.report["passed"]:
                        raise ContractionFailed(
                            f"Line map with l={case.l} has bound {built.report['bound']} > eps={self.eps}",
                            built.report,
                        )
            except (ContractionFailed, SearchBudgetExceeded) as e:
                self.failures[key] = e
                raise
            self.maps[key] = built
        return self.maps[key]

    def reports(self) -> Dict[str, dict]:
        out = {key: built.report for key, built in self.maps.items()}
        out.update({key: {"passed": False, **e.to_dict()} for key, e in self.failures.items()})
        return out


def verify_subgroup(
    G: SemidirectProduct,
    H: FiniteSubgroup,
    nt: NumberTheory,
    threshold: int,
    maps: MapCache,
    seed: int,
) -> dict:
    """Run every check for one hyper-elementary subgroup.

    Raises:
        LemmaFalsified: If no q in {p1, p2} works.
    """
    witness = is_hyperelementary(H)
    if witness is None:
        raise InconsistentData(f"Subgroup {H.to_dict()} is not hyper-elementary")
    q, condition = check_lemma_hyp_elm(H.parent, H, *nt.primes, witness=witness)
    record: Dict[str, Any] = {
        "subgroup": H.to_dict(),
        "witness": witness.to_dict(),
        "q": str(q),
        "condition": condition.value,
        "seed": str(seed),
    }
    try:
        case = classify_preimage(H, q, condition, G, threshold)
        record["case"] = case.to_dict()
        record["construction"] = case.construction_id
        built = maps.get(case)
        coset = assemble_coset_map(
            G,
            preimage(G, H),
            built,
            maps.S,
            maps.eps,
            conjugator=case.conjugator,
            radius=COSET_BALL_RADIUS,
            samples=COSET_SAMPLES,
            seed=seed,
        )
    except (ClassificationFailed, ContractionFailed, SearchBudgetExceeded, DescentFailed, EquivarianceFailed) as e:
        logger.warning(f"Subgroup check failed: {e.message}")
        record.update({"passed": False, "failure": e.to_dict()})
        return record
    record["isotropy_family"] = built.report["isotropy_family"]
    record["margins"] = {
        "eps": str(maps.eps),
        "map_bound": built.report.get("bound", built.report.get("worst")),
        "coset_worst": coset.report["worst_equivariance"],
    }
    record["coset_checks"] = coset.report
    record["passed"] = True
    return record


def _subgroup_order(H: FiniteSubgroup) -> tuple:
    return (H.order, H.lattice, H.j, H.u)


def pipeline(req: CertRequest) -> Certificate:
    """Run the whole pipeline and return its certificate.

    Raises:
        EigenvalueRootOfUnity: If A has a root-of-unity eigenvalue.
        PrimeSearchExhausted: If the prime search hits its cap.
        CapExceeded: If exhaustive enumeration exceeds the subgroup cap.
        LemmaFalsified: If some hyper-elementary subgroup refutes the prime lemma.
    """
    start = time.perf_counter()
    nt = number_theory(req)
    logger.info(f"Number theory: i_k={nt.i_k}, K={nt.K}, primes={nt.primes}, s={nt.s}, r={nt.r}")
    G = SemidirectProduct(req.A)
    F = FiniteQuotientDesc.for_matrix(req.A, nt.s, nt.r)
    threshold = case_threshold(req.L, req.S, req.eps)
    cert = Certificate(req, nt.i_k, nt.K, nt.primes, nt.s, nt.A_s_order, nt.r, threshold)
    cert.timings["number_theory"] = time.perf_counter() - start

    mark = time.perf_counter()
    subgroups = sorted(
        enumerate_hyperelementary(F, req.subgroup_cap, req.mode, req.samples, req.seed),
        key=_subgroup_order,
    )
    cert.timings["enumeration"] = time.perf_counter() - mark
    logger.info(f"Checking {len(subgroups)} hyper-elementary subgroups ({req.mode})")

    mark = time.perf_counter()
    maps = MapCache(G, req.S, req.eps, req.seed)
    for index, H in enumerate(subgroups):
        cert.subgroups.append(verify_subgroup(G, H, nt, threshold, maps, req.seed + index))
    cert.constructions = maps.reports()
    cert.timings["verification"] = time.perf_counter() - mark
    cert.timings["total"] = time.perf_counter() - start
    logger.info(f"Certificate {cert.status}: {len(cert.subgroups)} subgroups")
    return cert


@dataclass
class VerificationReport:
    passed: bool
    checked: int
    mismatches: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checked": self.checked, "mismatches": self.mismatches}


def verify_certificate(doc: dict) -> VerificationReport:
    """Replay every check recorded in a certificate from the certificate alone."""
    if doc.get("schema") != SCHEMA_VERSION:
        raise InconsistentData(f"Unsupported certificate schema {doc.get('schema')!r}")
    req = CertRequest.from_dict(doc["request"])
    nt = number_theory(req)
    mismatches: List[dict] = []

    def expect(name: str, recorded: Any, computed: Any) -> None:
        if recorded != computed:
            mismatches.append({"field": name, "recorded": recorded, "computed": computed})

    expect("i_k", doc["i_k"], [str(i) for i in nt.i_k])
    expect("K", doc["K"], str(nt.K))
    expect("primes", doc["primes"], [str(p) for p in nt.primes])
    expect("s", doc["s"], str(nt.s))
    expect("A_s_order", doc["A_s_order"], str(nt.A_s_order))
    expect("r", doc["r"], str(nt.r))
    threshold = case_threshold(req.L, req.S, req.eps)
    expect("threshold", doc["threshold"], str(threshold))

    G = SemidirectProduct(req.A)
    F = FiniteQuotientDesc.for_matrix(req.A, nt.s, nt.r)
    maps = MapCache(G, req.S, req.eps, req.seed)
    for index, record in enumerate(doc["subgroups"]):
        data = record["subgroup"]
        H = subgroup_from_parts(
            F, [[int(x) for x in row] for row in data["lattice"]], int(data["j"]), [int(x) for x in data["u"]]
        )
        w = record["witness"]
        witness = HyperWitness(
            GroupElement.make((int(x) for x in w["cyclic_gen"]["v"]), int(w["cyclic_gen"]["k"])),
            int(w["p"]),
            int(w["quotient_order"]),
        )
        if not verify_witness(H, witness):
            mismatches.append({"subgroup": index, "field": "witness"})
        replayed = verify_subgroup(G, H, nt, threshold, maps, int(record["seed"]))
        for name in ("q", "condition", "case", "isotropy_family", "passed"):
            if replayed.get(name) != record.get(name):
                mismatches.append(
                    {"subgroup": index, "field": name, "recorded": record.get(name), "computed": replayed.get(name)}
                )
    status = "PASSED" if doc["subgroups"] and not mismatches and all(r["passed"] for r in doc["subgroups"]) else "FAILED"
    expect("status", doc["status"], status)
    report = VerificationReport(not mismatches and status == "PASSED", len(doc["subgroups"]), mismatches)
    logger.info(f"Certificate verification: {report.passed}, {len(mismatches)} mismatches")
    return report
