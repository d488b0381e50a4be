"""Chain complexes of geometric modules, the transfer of a group ring automorphism,
and self-torsion through a verified contraction of the mapping cone.

D = Z[G] (x) C (x) R^n is stored as a geometric module over G x X whose
points are labelled (degree, cell), each of rank n.  Chain maps and
homotopies on D are ControlledMorphisms on that one module, so the degree
of a component is read off its labels.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from sympy import Matrix
from sympy.polys.domains import QQ, ZZ
from sympy.polys.domains.domain import Domain
from sympy.polys.matrices import DomainMatrix

from fj_workbench.base.controlled import (
    ControlledMorphism,
    ControlMap,
    GeometricModule,
    compose,
    control_of,
    eye,
    matrix,
    to_domain,
    to_fraction,
    zeros,
)
from fj_workbench.base.group_core import Group, IntMatrix, TrivialGroup
from fj_workbench.errors import (
    InconsistentData,
    NoFactorization,
    NotAContraction,
    NotInvertible,
    PreconditionFailed,
)

logger = logging.getLogger("fjwb.transfer")

Cell = Hashable
PerDegree = Dict[int, DomainMatrix]


@dataclass
class FiniteChainComplex:
    """Bounded chain complex of free modules with cells placed in X.

    ``boundary[d]`` is the matrix of C_d -> C_{d-1} (rows indexed by the
    cells of degree d-1).
    """

    domain: Domain
    cells: Dict[int, List[Cell]]
    boundary: PerDegree
    positions: Dict[Cell, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for d, M in self.boundary.items():
            expected = (self.rank(d - 1), self.rank(d))
            if M.shape != expected:
                raise InconsistentData(f"Boundary in degree {d} has shape {M.shape}, expected {expected}")
        for d in self.degrees:
            if d - 1 in self.boundary and d in self.boundary:
                if not (self.boundary[d - 1] * self.boundary[d]).is_zero_matrix:
                    raise InconsistentData(f"Boundary squares to a nonzero map in degree {d}")

    @classmethod
    def point(cls, domain: Domain = ZZ) -> "FiniteChainComplex":
        return cls(domain, {0: ["*"]}, {}, {"*": Fraction(0)})

    @property
    def degrees(self) -> List[int]:
        return sorted(d for d, cells in self.cells.items() if cells)

    @property
    def dimension(self) -> int:
        return max(self.degrees, default=0)

    def rank(self, d: int) -> int:
        return len(self.cells.get(d, []))

    def boundary_matrix(self, d: int) -> DomainMatrix:
        return self.boundary.get(d, zeros((self.rank(d - 1), self.rank(d)), self.domain))

    def euler_characteristic(self) -> int:
        return sum((-1) ** d * self.rank(d) for d in self.degrees)

    def identity_map(self) -> PerDegree:
        return {d: eye(self.rank(d), self.domain) for d in self.degrees}

    def boundary_control(self) -> Fraction:
        """Largest diameter of a cell together with the cells in its boundary."""
        worst = Fraction(0)
        for d, M in self.boundary.items():
            rows = M.to_list()
            for j, cell in enumerate(self.cells[d]):
                spots = [self.positions[cell]]
                spots += [self.positions[self.cells[d - 1][i]] for i, row in enumerate(rows) if row[j]]
                worst = max(worst, max(spots) - min(spots))
        return worst

    def to_dict(self) -> dict:
        return {
            "cells": {str(d): [str(c) for c in cells] for d, cells in self.cells.items()},
            "boundary": {
                str(d): [[str(self.domain.to_sympy(x)) for x in row] for row in M.to_list()]
                for d, M in self.boundary.items()
            },
            "positions": {str(c): str(p) for c, p in self.positions.items()},
        }


def subdivided_interval(l: int, domain: Domain = ZZ) -> FiniteChainComplex:
    """[0, 1] cut into l edges; vertices at i/l, edges at their barycenters."""
    if l < 1:
        raise PreconditionFailed(f"Subdivision needs l >= 1, got {l}")
    vertices = [("v", i) for i in range(l + 1)]
    edges = [("e", i) for i in range(l)]
    rows = [[0] * l for _ in range(l + 1)]
    for i in range(l):
        rows[i][i] = -1
        rows[i + 1][i] = 1
    positions = {("v", i): Fraction(i, l) for i in range(l + 1)}
    positions.update({("e", i): Fraction(2 * i + 1, 2 * l) for i in range(l)})
    return FiniteChainComplex(domain, {0: vertices, 1: edges}, {1: matrix(rows, domain)}, positions)


def tensor_module(C: FiniteChainComplex, group: Group, n: int) -> GeometricModule:
    return GeometricModule(group, {(d, c): n for d in C.degrees for c in C.cells[d]}, C.domain)


def _tensor_blocks(
    target: ControlledMorphism,
    C: FiniteChainComplex,
    delta: Any,
    per_degree: PerDegree,
    shift: int,
    coeff: DomainMatrix,
) -> None:
    """Add delta (x) M (x) coeff, where M maps C_d to C_{d+shift}."""
    for d, M in per_degree.items():
        for i, row in enumerate(M.to_list()):
            for j, x in enumerate(row):
                if x:
                    key = (delta, (d + shift, C.cells[d + shift][i]), (d, C.cells[d][j]))
                    target.add_block(key, coeff * x)


def differential(C: FiniteChainComplex, module: GeometricModule, n: int) -> ControlledMorphism:
    d = ControlledMorphism(module, module, {})
    _tensor_blocks(d, C, module.group.identity(), C.boundary, -1, eye(n, C.domain))
    return d


@dataclass
class TransferData:
    """Step data for transferring psi: its decomposition over T and the homotopy action on C.

    psi(h (x) v) = sum over g of h g^-1 (x) psi[g](v), and likewise for psi_inv.
    ``phi[g]`` is a chain map of C per degree; ``homotopies[(g, g')]`` raises degree by one.
    """

    group: Group
    psi: Dict[Any, DomainMatrix]
    psi_inv: Dict[Any, DomainMatrix]
    phi: Dict[Any, PerDegree]
    homotopies: Dict[Tuple[Any, Any], PerDegree] = field(default_factory=dict)

    @property
    def T(self) -> List[Any]:
        return sorted(set(self.psi) | set(self.psi_inv), key=repr)

    @property
    def n(self) -> int:
        return next(iter(self.psi.values())).shape[0]

    def check_consistency(self) -> None:
        """Both convolutions of psi with psi_inv must be the identity of Z[G]^n.

        Raises:
            InconsistentData: On the first group element where a convolution fails.
        """
        G = self.group
        e = G.identity()
        domain = next(iter(self.psi.values())).domain
        for name, left, right in (("psi psi_inv", self.psi, self.psi_inv), ("psi_inv psi", self.psi_inv, self.psi)):
            sums: Dict[Any, DomainMatrix] = {}
            for g, a in left.items():
                for g2, b in right.items():
                    u = G.mul(g, g2)
                    sums[u] = sums[u] + a * b if u in sums else a * b
            sums.setdefault(e, zeros((self.n, self.n), domain))
            for u, total in sums.items():
                expected = eye(self.n, domain) if u == e else zeros((self.n, self.n), domain)
                if not (total - expected).is_zero_matrix:
                    raise InconsistentData(
                        f"Convolution {name} is not the identity at group element {u!r}",
                        {"element": repr(u)},
                    )


def trivial_transfer_data(
    group: Group, psi: Dict[Any, DomainMatrix], psi_inv: Dict[Any, DomainMatrix], C: FiniteChainComplex
) -> TransferData:
    """Data for a group acting trivially on C: every phi_g the identity, all homotopies zero."""
    ident = C.identity_map()
    return TransferData(group, dict(psi), dict(psi_inv), {g: ident for g in set(psi) | set(psi_inv)})


def twisted_diagonal_psi(E: IntMatrix, domain: Domain = ZZ) -> Tuple[Dict[int, DomainMatrix], Dict[int, DomainMatrix]]:
    """psi = diag(t, t^-1, t, ...) E over Z[Z], as decompositions over T = {t, t^-1}.

    Coordinate i is multiplied by t^sigma_i with sigma_i = +1 for even i and
    -1 for odd i; in the additive model t is the integer 1.
    """
    if not E.is_unimodular():
        raise PreconditionFailed("The mixing matrix must be invertible over Z")
    n = E.n
    sigma = [1 if i % 2 == 0 else -1 for i in range(n)]
    E_m = matrix(E.rows, domain)
    E_inv = matrix(E.inverse().rows, domain)

    def projector(indices: Iterable[int]) -> DomainMatrix:
        keep = set(indices)
        return matrix([[int(i == j and i in keep) for j in range(n)] for i in range(n)], domain)

    psi, psi_inv = {}, {}
    for g in (1, -1):
        if any(-s == g for s in sigma):
            psi[g] = projector(i for i in range(n) if -sigma[i] == g) * E_m
        if any(s == g for s in sigma):
            psi_inv[g] = E_inv * projector(i for i in range(n) if sigma[i] == g)
    return psi, psi_inv


def verify_chain_homotopy(
    d: ControlledMorphism, L: ControlledMorphism, f: ControlledMorphism, g: ControlledMorphism
) -> Fraction:
    """Max-norm of dL + Ld - (f - g); zero exactly when L is a homotopy from f to g."""
    return (compose(d, L) + compose(L, d) - (f - g)).max_entry()


def chain_map_residual(d: ControlledMorphism, f: ControlledMorphism) -> Fraction:
    return (compose(d, f) - compose(f, d)).max_entry()


@dataclass
class ChainEquivPack:
    """Self chain homotopy equivalence Phi with inverse and the two homotopies."""

    module: GeometricModule
    differential: ControlledMorphism
    Phi: ControlledMorphism
    Phi_inv: ControlledMorphism
    Hcal: ControlledMorphism
    Hcal_prime: ControlledMorphism
    positions: Dict[Any, Fraction] = field(default_factory=dict)
    dimension: int = 0
    chain_complex: Optional[FiniteChainComplex] = None
    validated: bool = False

    @property
    def group(self) -> Group:
        return self.module.group

    def residuals(self) -> Dict[str, Fraction]:
        ident = ControlledMorphism.identity(self.module)
        return {
            "Phi_chain_map": chain_map_residual(self.differential, self.Phi),
            "Phi_inv_chain_map": chain_map_residual(self.differential, self.Phi_inv),
            "Hcal": verify_chain_homotopy(
                self.differential, self.Hcal, compose(self.Phi, self.Phi_inv), ident
            ),
            "Hcal_prime": verify_chain_homotopy(
                self.differential, self.Hcal_prime, compose(self.Phi_inv, self.Phi), ident
            ),
        }

    def validate(self) -> Dict[str, Fraction]:
        residuals = self.residuals()
        self.validated = all(r == 0 for r in residuals.values())
        logger.info(f"Chain equivalence residuals: { {k: str(v) for k, v in residuals.items()} }")
        return residuals

    def position(self, label: Any) -> Fraction:
        return self.positions.get(label[1], Fraction(0))


def transfer(psi: Dict[Any, DomainMatrix], data: TransferData, C: FiniteChainComplex) -> ChainEquivPack:
    """Transfer psi along the homotopy action on C to a self equivalence of D.

    Raises:
        InconsistentData: If ``data`` does not decompose ``psi`` or psi_inv is not inverse.
    """
    if set(psi) != set(data.psi) or any(not (psi[g] - data.psi[g]).is_zero_matrix for g in psi):
        raise InconsistentData("Transfer data carries a different decomposition of psi")
    data.check_consistency()
    G = data.group
    n = data.n
    module = tensor_module(C, G, n)
    d = differential(C, module, n)

    Phi = ControlledMorphism(module, module, {})
    for g, block in data.psi.items():
        _tensor_blocks(Phi, C, G.inv(g), data.phi[g], 0, block)
    Phi_inv = ControlledMorphism(module, module, {})
    for g, block in data.psi_inv.items():
        _tensor_blocks(Phi_inv, C, G.inv(g), data.phi[g], 0, block)

    Hcal = ControlledMorphism(module, module, {})
    Hcal_prime = ControlledMorphism(module, module, {})
    for (g, g2), H in data.homotopies.items():
        delta = G.inv(G.mul(g, g2))
        if g in data.psi and g2 in data.psi_inv:
            _tensor_blocks(Hcal, C, delta, H, 1, data.psi[g] * data.psi_inv[g2])
        if g in data.psi_inv and g2 in data.psi:
            _tensor_blocks(Hcal_prime, C, delta, H, 1, data.psi_inv[g] * data.psi[g2])

    pack = ChainEquivPack(
        module, d, Phi, Phi_inv, Hcal, Hcal_prime, dict(C.positions), C.dimension, C
    )
    pack.validate()
    return pack


def matrix_pack(
    domain: Domain,
    ranks: Dict[int, int],
    boundary: Dict[int, Sequence[Sequence[Any]]],
    phi: Dict[int, Sequence[Sequence[Any]]],
    phi_inv: Dict[int, Sequence[Sequence[Any]]],
    hcal: Optional[Dict[int, Sequence[Sequence[Any]]]] = None,
    hcal_prime: Optional[Dict[int, Sequence[Sequence[Any]]]] = None,
) -> ChainEquivPack:
    """Pack over the trivial group from plain per-degree matrices (cells are 0..rank-1)."""
    cells = {d: list(range(r)) for d, r in ranks.items()}
    C = FiniteChainComplex(
        domain,
        cells,
        {d: matrix(rows, domain, (ranks.get(d - 1, 0), ranks[d])) for d, rows in boundary.items()},
        {c: Fraction(0) for cs in cells.values() for c in cs},
    )
    G = TrivialGroup()
    module = tensor_module(C, G, 1)
    one = eye(1, domain)

    def lift(per: Optional[Dict[int, Sequence[Sequence[Any]]]], shift: int) -> ControlledMorphism:
        out = ControlledMorphism(module, module, {})
        mats = {
            d: matrix(rows, domain, (ranks.get(d + shift, 0), ranks[d]))
            for d, rows in (per or {}).items()
            if ranks.get(d + shift, 0) and ranks.get(d, 0)
        }
        _tensor_blocks(out, C, 0, mats, shift, one)
        return out

    pack = ChainEquivPack(
        module,
        differential(C, module, 1),
        lift(phi, 0),
        lift(phi_inv, 0),
        lift(hcal, 1),
        lift(hcal_prime, 1),
        dict(C.positions),
        C.dimension,
        C,
    )
    pack.validate()
    return pack


def cone_degree(label: Tuple[str, Any]) -> int:
    tag, x = label
    return x[0] + 1 if tag == "a" else x[0]


def _cone_module(module: GeometricModule) -> GeometricModule:
    ranks = {("a", x): r for x, r in module.ranks.items()}
    ranks.update({("b", x): r for x, r in module.ranks.items()})
    return GeometricModule(module.group, ranks, module.domain)


def _embed(
    target: ControlledMorphism, f: ControlledMorphism, to_tag: str, from_tag: str, sign: int = 1
) -> None:
    for (delta, x_to, x_from), block in f.blocks.items():
        target.add_block((delta, (to_tag, x_to), (from_tag, x_from)), block if sign > 0 else -block)


def mapping_cone(pack: ChainEquivPack) -> ControlledMorphism:
    """Boundary of cone(Phi), cone_n = D_{n-1} + D_n, as [[-d, 0], [Phi, d]]."""
    module = _cone_module(pack.module)
    dc = ControlledMorphism(module, module, {})
    _embed(dc, pack.differential, "a", "a", -1)
    _embed(dc, pack.differential, "b", "b")
    _embed(dc, pack.Phi, "b", "a")
    return dc


def closed_form_contraction(pack: ChainEquivPack) -> ControlledMorphism:
    """Gamma(a, b) = (Hcal' a + Phi' b, -Hcal b)."""
    module = _cone_module(pack.module)
    gamma = ControlledMorphism(module, module, {})
    _embed(gamma, pack.Hcal_prime, "a", "a")
    _embed(gamma, pack.Phi_inv, "a", "b")
    _embed(gamma, pack.Hcal, "b", "b", -1)
    return gamma


def _ordered_labels(module: GeometricModule, keep: Callable[[Any], bool]) -> List[Any]:
    return sorted((x for x in module.labels if keep(x)), key=repr)


def to_matrix(f: ControlledMorphism, rows: Sequence[Any], cols: Sequence[Any]) -> DomainMatrix:
    """Plain matrix of a morphism over the trivial group, in the given label orders."""
    if not isinstance(f.group, TrivialGroup):
        raise PreconditionFailed("Plain matrices exist only over the trivial group")
    row_at, col_at = {}, {}
    offset = 0
    for x in rows:
        row_at[x] = offset
        offset += f.target.rank(x)
    height = offset
    offset = 0
    for x in cols:
        col_at[x] = offset
        offset += f.source.rank(x)
    width = offset
    entries = [[f.domain.zero] * width for _ in range(height)]
    for (_, x_to, x_from), block in f.blocks.items():
        if x_to not in row_at or x_from not in col_at:
            continue
        for i, row in enumerate(block.to_list()):
            for j, x in enumerate(row):
                entries[row_at[x_to] + i][col_at[x_from] + j] += x
    if not height or not width:
        return zeros((height, width), f.domain)
    return DomainMatrix(entries, (height, width), f.domain)


def _from_matrix(
    M: DomainMatrix, rows: Sequence[Any], cols: Sequence[Any], module: GeometricModule
) -> ControlledMorphism:
    out = ControlledMorphism(module, module, {})
    entries = M.to_list()
    e = module.group.identity()
    r0 = 0
    for x_to in rows:
        rt = module.rank(x_to)
        c0 = 0
        for x_from in cols:
            cf = module.rank(x_from)
            block = [row[c0 : c0 + cf] for row in entries[r0 : r0 + rt]]
            out.add_block((e, x_to, x_from), DomainMatrix(block, (rt, cf), module.domain))
            c0 += cf
        r0 += rt
    return out


def solved_contraction(dc: ControlledMorphism) -> ControlledMorphism:
    """Contraction of an acyclic cone over the trivial group, degree by degree.

    Solves d_{n+1} Gamma_n = id - Gamma_{n-1} d_n from the bottom degree up,
    over the rationals; the result must lie in the coefficient ring.

    Raises:
        NotAContraction: If some degree has no solution.
    """
    module = dc.source
    if not isinstance(module.group, TrivialGroup):
        raise NotAContraction("Degreewise solving is only available over the trivial group")
    degrees = sorted({cone_degree(x) for x in module.labels})
    labels = {n: _ordered_labels(module, lambda x, n=n: cone_degree(x) == n) for n in degrees}
    gamma = ControlledMorphism(module, module, {})
    previous: Optional[Matrix] = None
    for n in degrees:
        here = labels[n]
        up = labels.get(n + 1, [])
        down = labels.get(n - 1, [])
        size = sum(module.rank(x) for x in here)
        residual = Matrix.eye(size)
        if previous is not None and down:
            d_n = to_matrix(dc, down, here).convert_to(QQ).to_Matrix()
            residual = residual - previous * d_n
        if not up:
            if any(residual):
                raise NotAContraction(f"Cone is not acyclic in degree {n}")
            previous = None
            continue
        d_up = to_matrix(dc, here, up).convert_to(QQ).to_Matrix()
        try:
            solution, params = d_up.gauss_jordan_solve(residual)
        except ValueError as e:
            raise NotAContraction(f"No contraction in degree {n}: {e}") from e
        solution = solution.xreplace({p: 0 for p in params})
        if module.domain == ZZ and any(not x.is_integer for x in solution):
            raise NotAContraction(f"Contraction in degree {n} is not integral")
        previous = solution
        rows = [[to_domain(module.domain, Fraction(int(x.p), int(x.q))) for x in row] for row in solution.tolist()]
        M = DomainMatrix(rows, (len(rows), len(rows[0]) if rows else 0), module.domain)
        gamma = gamma + _from_matrix(M, up, here, module)
    return gamma


def _is_contraction(dc: ControlledMorphism, gamma: ControlledMorphism) -> bool:
    ident = ControlledMorphism.identity(dc.source)
    return (compose(dc, gamma) + compose(gamma, dc)).equals(ident)


@dataclass
class TorsionResult:
    """tau = (d + Gamma) from odd to even cone degrees, with its verified inverse."""

    tau: ControlledMorphism
    tau_inv: ControlledMorphism
    gamma: ControlledMorphism
    method: str

    @property
    def odd_labels(self) -> List[Any]:
        return _ordered_labels(self.tau.source, lambda x: True)

    @property
    def even_labels(self) -> List[Any]:
        return _ordered_labels(self.tau.target, lambda x: True)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "tau": self.tau.to_records(),
            "support_size": len(self.tau.blocks),
        }


def self_torsion(pack: ChainEquivPack, method: str = "auto") -> TorsionResult:
    """Self-torsion representative of a validated chain equivalence.

    Args:
        pack: Validated pack.
        method: ``closed_form``, ``solve`` or ``auto`` (closed form, then solve).

    Raises:
        NotAContraction: If no contraction of the cone is found.
        NotInvertible: If d + Gamma fails to invert.
    """
    if not pack.validated:
        raise PreconditionFailed("Self-torsion needs a validated chain equivalence")
    dc = mapping_cone(pack)
    gamma = None
    used = method
    if method in ("auto", "closed_form"):
        candidate = closed_form_contraction(pack)
        if _is_contraction(dc, candidate):
            gamma, used = candidate, "closed_form"
        elif method == "closed_form":
            raise NotAContraction("Closed-form contraction candidate fails the contraction identity")
    if gamma is None:
        gamma = solved_contraction(dc)
        used = "solve"
        if not _is_contraction(dc, gamma):
            raise NotAContraction("Solved contraction fails the contraction identity")

    full = dc + gamma
    square = compose(gamma, gamma)
    series = ControlledMorphism.identity(dc.source)
    term = ControlledMorphism.identity(dc.source)
    while True:
        term = -compose(square, term)
        if term.is_zero:
            break
        series = series + term
    full_inv = compose(full, series)

    odd = lambda x: cone_degree(x) % 2 == 1  # noqa: E731
    even = lambda x: cone_degree(x) % 2 == 0  # noqa: E731
    tau = full.restrict(odd, even)
    tau_inv = full_inv.restrict(even, odd)
    if not compose(tau, tau_inv).equals(ControlledMorphism.identity(tau.target)) or not compose(
        tau_inv, tau
    ).equals(ControlledMorphism.identity(tau.source)):
        raise NotInvertible("d + Gamma is not invertible between odd and even cone degrees")
    logger.info(f"Self-torsion via {used} contraction with {len(tau.blocks)} support blocks")
    return TorsionResult(tau, tau_inv, gamma, used)


def torsion_determinant(result: TorsionResult) -> Fraction:
    """Determinant of tau over the trivial group (odd and even labels in repr order)."""
    M = to_matrix(result.tau, result.even_labels, result.odd_labels)
    if M.shape[0] != M.shape[1]:
        raise NotInvertible(f"Torsion matrix is not square: {M.shape}")
    if M.shape[0] == 0:
        return Fraction(1)
    return to_fraction(M.domain, M.det())


def augmentation_check(pack: ChainEquivPack, psi: Dict[Any, DomainMatrix]) -> bool:
    """Does q o Phi equal psi o q, for q induced by the augmentation C_0 -> Z?"""
    C = pack.chain_complex
    if C is None:
        raise PreconditionFailed("Augmentation check needs a pack built by transfer")
    G = pack.group
    n = next(iter(psi.values())).shape[0]
    base = GeometricModule(G, {"*": n}, pack.module.domain)
    e = G.identity()
    q = ControlledMorphism(
        pack.module, base, {(e, "*", (0, c)): eye(n, base.domain) for c in C.cells.get(0, [])}
    )
    psi_map = ControlledMorphism(base, base, {})
    for g, block in psi.items():
        psi_map.add_block((G.inv(g), "*", "*"), block)
    return compose(q, pack.Phi).equals(compose(psi_map, q))


def _word_lengths(group: Group, T: Sequence[Any], targets: Iterable[Any], cap: int) -> Dict[Any, int]:
    wanted = set(targets)
    e = group.identity()
    lengths = {e: 0}
    frontier = [e]
    length = 0
    while wanted - lengths.keys() and frontier and length < cap:
        length += 1
        nxt = []
        for x in frontier:
            for t in T:
                y = group.mul(x, t)
                if y not in lengths:
                    lengths[y] = length
                    nxt.append(y)
        frontier = nxt
    missing = wanted - lengths.keys()
    if missing:
        raise NoFactorization(
            f"{len(missing)} support elements admit no T-word of length <= {cap}",
            {"example": repr(next(iter(missing)))},
        )
    return lengths


def support_word_bound(
    tau: ControlledMorphism,
    T: Sequence[Any],
    delta0: Fraction,
    locate: Callable[[Any], Fraction],
    cap: int = 4096,
) -> Tuple[int, Fraction]:
    """Least K such that each support pair ((h delta, x'), (h, x)) has delta^-1 a T-word
    of length <= K and |x' - x| <= K delta0; returned with the worst deviation.
    """
    G = tau.group
    lengths = _word_lengths(G, T, (G.inv(delta) for delta, _, _ in tau.blocks), cap)
    K = 0
    worst = Fraction(0)
    for delta, x_to, x_from in tau.blocks:
        deviation = abs(Fraction(locate(x_to)) - Fraction(locate(x_from)))
        worst = max(worst, deviation)
        K = max(K, lengths[G.inv(delta)], ceil(deviation / delta0))
    return K, worst


def cone_locator(pack: ChainEquivPack) -> Callable[[Any], Fraction]:
    return lambda label: pack.position(label[1])


def transfer_control(pack: ChainEquivPack) -> ControlMap:
    """Control by the X coordinate alone, ignoring the group coordinate."""
    return ControlMap(lambda h, x: pack.position(x), lambda a, b: abs(a - b), "interval")


def phi_control(pack: ChainEquivPack) -> Fraction:
    return Fraction(control_of(pack.Phi, transfer_control(pack)))
