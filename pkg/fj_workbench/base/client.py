"""Basic workbench client: matrix analysis, finite quotients, subgroups and torsion."""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional

from fj_workbench.base.controlled import ring_domain
from fj_workbench.base.group_core import (
    FiniteQuotientDesc,
    IntMatrix,
    IntegerGroup,
    dirichlet_primes,
    has_root_of_unity_eigenvalue,
    index_ik,
    is_prime_certified,
    matrix_order_mod,
    root_of_unity_orders,
)
from fj_workbench.base.hyperelementary import (
    check_lemma_hyp_elm,
    cyclic_subgroups,
    enumerate_hyperelementary,
    find_lemma_prime_power,
)
from fj_workbench.base.transfer import (
    augmentation_check,
    cone_locator,
    matrix_pack,
    phi_control,
    self_torsion,
    subdivided_interval,
    support_word_bound,
    torsion_determinant,
    transfer,
    trivial_transfer_data,
    twisted_diagonal_psi,
)
from fj_workbench.config import WorkbenchConfig
from fj_workbench.errors import LemmaFalsified, PreconditionFailed

logger = logging.getLogger("fjwb.client")


def _per_degree(data: Optional[Dict[str, Any]]) -> Optional[Dict[int, Any]]:
    if data is None:
        return None
    return {int(d): rows for d, rows in data.items()}


@dataclass
class HyperelemRequest:
    """Finite quotient (Z/s)^n semidirect Z/r and how to list its hyper-elementary subgroups."""

    A: IntMatrix
    s: int
    r: Optional[int] = None
    exhaustive: bool = True
    samples: int = 100
    seed: int = 0
    primes: Optional[List[int]] = None


class WorkbenchClient:
    """Client for the exact group-theoretic and algebraic parts of the workbench."""

    def __init__(self, config: WorkbenchConfig):
        """Initialize the workbench client.

        Args:
            config: Workbench configuration.
        """
        self.config = config

    @classmethod
    def from_env(cls, env_path: Optional[str] = None) -> "WorkbenchClient":
        """Create a client from environment variables.

        Returns:
            WorkbenchClient: Client instance.
        """
        return cls(WorkbenchConfig.from_env(env_path))

    def analyze(self, A: IntMatrix, L: int = 5) -> Dict[str, Any]:
        """Indices i_k for k <= L, their product K and the root-of-unity report.

        Args:
            A: Twisting matrix.
            L: Largest k.

        Returns:
            Dict[str, Any]: Analysis report.
        """
        if L < 1:
            raise PreconditionFailed(f"L must be at least 1, got {L}")
        i_k = [index_ik(A, k) for k in range(1, L + 1)]
        K = 1
        for i in i_k:
            K *= i
        return {
            "rows": [[str(x) for x in row] for row in A.rows],
            "det": str(A.det()),
            "unimodular": A.is_unimodular(),
            "i_k": {str(k): str(i) for k, i in enumerate(i_k, start=1)},
            "K": str(K),
            "root_of_unity_eigenvalue": has_root_of_unity_eigenvalue(A),
            "root_of_unity_orders": root_of_unity_orders(A),
        }

    def dirichlet(self, K: int, lower: int, count: int = 2) -> Dict[str, Any]:
        primes = dirichlet_primes(K, lower, count, self.config.prime_candidate_cap)
        return {"K": str(K), "lower": str(lower), "primes": [str(p) for p in primes]}

    def quotient(self, A: IntMatrix, s: int, r: Optional[int] = None) -> FiniteQuotientDesc:
        return FiniteQuotientDesc.for_matrix(A, s, r)

    def hyperelem(self, req: HyperelemRequest) -> Dict[str, Any]:
        """List hyper-elementary subgroups and run both prime lemmas where they apply.

        The prime lemma for hyper-elementary subgroups runs when s = p1 p2 for
        two primes and r = s |A_s|; the prime power lemma runs on every cyclic
        subgroup meeting the lattice part nontrivially (exhaustive mode only).

        Args:
            req: Quotient and enumeration settings.

        Returns:
            Dict[str, Any]: Counts, lemma outcomes and falsifiers.
        """
        r = req.r if req.r is not None else req.s * matrix_order_mod(req.A, req.s)
        F = FiniteQuotientDesc.for_matrix(req.A, req.s, r)
        mode = "exhaustive" if req.exhaustive else "sampling"
        subgroups = enumerate_hyperelementary(
            F, self.config.subgroup_cap, mode, req.samples, req.seed
        )
        report: Dict[str, Any] = {
            "quotient": F.to_dict(),
            "mode": mode,
            "hyperelementary_count": len(subgroups),
        }

        primes = req.primes or _two_prime_split(req.s)
        if primes is not None and r == req.s * F.A_order:
            p1, p2 = primes
            outcomes: Dict[str, int] = {}
            falsifiers = []
            for H in subgroups:
                try:
                    q, condition = check_lemma_hyp_elm(F, H, p1, p2)
                    key = f"q={q}:{condition.value}"
                    outcomes[key] = outcomes.get(key, 0) + 1
                except LemmaFalsified as e:
                    falsifiers.append(e.to_dict())
            report["lemma_hyp_elm"] = {"p1": str(p1), "p2": str(p2), "outcomes": outcomes, "falsifiers": falsifiers}

        if req.exhaustive:
            witnesses = 0
            falsifiers = []
            for C in cyclic_subgroups(F, self.config.subgroup_cap):
                if C.intersection_order == 1:
                    continue
                try:
                    find_lemma_prime_power(F, C)
                    witnesses += 1
                except LemmaFalsified as e:
                    falsifiers.append(e.to_dict())
            report["lemma_prime_power"] = {"witnesses": witnesses, "falsifiers": falsifiers}
        logger.info(f"Hyper-elementary scan of |F|={F.order}: {len(subgroups)} subgroups")
        return report

    def torsion(self, description: Dict[str, Any]) -> Dict[str, Any]:
        """Self-torsion of a chain equivalence given as plain matrices or as an interval transfer.

        ``{"mode": "matrices", "ring": "QQ", "ranks": {...}, "boundary": {...},
        "phi": {...}, "phi_inv": {...}, "hcal": {...}, "hcal_prime": {...}}``
        describes a pack over the trivial group; ``{"mode": "interval", "l": 4,
        "E": [[1, 0], [0, 1]]}`` transfers the twisted diagonal matrix over Z[Z]
        along the subdivided interval.

        Args:
            description: Pack description.

        Returns:
            Dict[str, Any]: Residuals, torsion and measurements.
        """
        mode = description.get("mode", "matrices")
        method = description.get("method", "auto")
        if mode == "matrices":
            domain = ring_domain(description.get("ring", "QQ"))
            pack = matrix_pack(
                domain,
                {int(d): int(r) for d, r in description["ranks"].items()},
                _per_degree(description.get("boundary", {})),
                _per_degree(description["phi"]),
                _per_degree(description["phi_inv"]),
                _per_degree(description.get("hcal")),
                _per_degree(description.get("hcal_prime")),
            )
            residuals = {k: str(v) for k, v in pack.validate().items()}
            result = self_torsion(pack, method)
            return {
                "mode": mode,
                "residuals": residuals,
                "torsion": result.to_dict(),
                "determinant": str(torsion_determinant(result)),
            }
        if mode == "interval":
            l = int(description.get("l", 2))
            E = IntMatrix.from_rows(description.get("E", [[1, 0], [0, 1]]))
            C = subdivided_interval(l)
            psi, psi_inv = twisted_diagonal_psi(E)
            data = trivial_transfer_data(IntegerGroup(), psi, psi_inv, C)
            pack = transfer(psi, data, C)
            residuals = {k: str(v) for k, v in pack.residuals().items()}
            result = self_torsion(pack, method)
            delta0 = Fraction(1, l)
            K, worst = support_word_bound(
                result.tau, data.T, delta0, cone_locator(pack), self.config.word_cap
            )
            N = C.dimension
            return {
                "mode": mode,
                "l": l,
                "residuals": residuals,
                "augmentation": augmentation_check(pack, psi),
                "boundary_control": str(C.boundary_control()),
                "phi_control": str(phi_control(pack)),
                "torsion": result.to_dict(),
                "support_word_bound": {
                    "K": K,
                    "worst_deviation": str(worst),
                    "delta0": str(delta0),
                    "N": N,
                    "within_10N": K <= 10 * N,
                },
            }
        raise PreconditionFailed(f"Unknown torsion mode {mode!r}")


def _two_prime_split(s: int) -> Optional[List[int]]:
    for p in range(2, int(s**0.5) + 1):
        if s % p == 0:
            q = s // p
            if is_prime_certified(p) and is_prime_certified(q) and p != q:
                return [p, q]
            return None
    return None
