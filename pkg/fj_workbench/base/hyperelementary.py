"""Subgroups of the finite quotient F = (Z/s)^n semidirect Z/r.

A subgroup H of F is stored in normal form: the preimage lattice of
H n (Z/s)^n in Z^n (HNF, always containing sZ^n), the generator j of the
image jZ/r, and a slope u reduced modulo the lattice so that (u, j) lies in
H.  Every subgroup has exactly one such form, so equality of subgroups is
equality of fields and no element list is needed unless asked for.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from itertools import product
from math import gcd, lcm
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from sympy import divisors, factorint

from fj_workbench.base.group_core import (
    FiniteQuotientDesc,
    GroupElement,
    Vector,
    hermite_normal_form,
    lattice_contains,
    lattice_index,
    lattice_reduce,
)
from fj_workbench.errors import (
    CapExceeded,
    HypothesisViolated,
    InconsistentData,
    LemmaFalsified,
    PreconditionFailed,
)

logger = logging.getLogger("fjwb.hyperelementary")


def _prime_part(m: int, p: int) -> int:
    part = 1
    while m % p == 0:
        m //= p
        part *= p
    return part


def _is_prime_power(m: int, p: int) -> bool:
    return _prime_part(m, p) == m


def _modulus_lattice(F: FiniteQuotientDesc, vectors: Iterable[Sequence[int]]) -> Tuple[Vector, ...]:
    kernel = [tuple(F.s * int(i == j) for j in range(F.n)) for i in range(F.n)]
    return hermite_normal_form(list(vectors) + kernel, F.n)


def _close_mod(F: FiniteQuotientDesc, basis: Tuple[Vector, ...], j: int) -> Tuple[Vector, ...]:
    """Smallest lattice above ``basis`` invariant under A^j modulo s."""
    while True:
        grown = _modulus_lattice(F, list(basis) + [F.act(j, w) for w in basis])
        if grown == basis:
            return basis
        basis = grown


@dataclass(frozen=True)
class FiniteSubgroup:
    """Subgroup of a finite quotient in (lattice, j, u) normal form."""

    parent: FiniteQuotientDesc
    lattice: Tuple[Vector, ...]
    j: int
    u: Vector

    @property
    def intersection_order(self) -> int:
        """|H n (Z/s)^n|."""
        return self.parent.s**self.parent.n // lattice_index(self.lattice, self.parent.n)

    @property
    def image_order(self) -> int:
        return self.parent.r // self.j

    @property
    def order(self) -> int:
        return self.intersection_order * self.image_order

    @property
    def slope(self) -> GroupElement:
        return GroupElement(self.u, self.j % self.parent.r)

    def lattice_generators(self) -> List[GroupElement]:
        s = self.parent.s
        gens = []
        for row in self.lattice:
            v = tuple(x % s for x in row)
            if any(v):
                gens.append(GroupElement(v, 0))
        return gens

    def generators(self) -> List[GroupElement]:
        gens = self.lattice_generators()
        if self.j != self.parent.r:
            gens.append(self.slope)
        return gens

    def contains(self, g: GroupElement) -> bool:
        F = self.parent
        g = F.reduce(g)
        if g.k % self.j:
            return False
        rest = F.mul(g, F.power(self.slope, -(g.k // self.j))) if self.j != F.r else g
        return lattice_contains(self.lattice, rest.v)

    def lattice_elements(self) -> List[Vector]:
        F = self.parent
        seen = {(0,) * F.n}
        frontier = list(seen)
        steps = [g.v for g in self.lattice_generators()]
        while frontier:
            nxt = []
            for w in frontier:
                for b in steps:
                    x = tuple((a + c) % F.s for a, c in zip(w, b))
                    if x not in seen:
                        seen.add(x)
                        nxt.append(x)
            frontier = nxt
        return sorted(seen)

    @cached_property
    def elements(self) -> Tuple[GroupElement, ...]:
        F = self.parent
        W = self.lattice_elements()
        out = []
        c: Vector = (0,) * F.n
        for i in range(self.image_order):
            k = (i * self.j) % F.r
            for w in W:
                out.append(GroupElement(tuple((a + b) % F.s for a, b in zip(w, c)), k))
            c = tuple((a + b) % F.s for a, b in zip(c, F.act(i * self.j, self.u)))
        return tuple(sorted(out))

    def materialize(self, cap: int) -> Tuple[GroupElement, ...]:
        if self.order > cap:
            raise CapExceeded(f"Subgroup of order {self.order} exceeds cap {cap}")
        return self.elements

    def to_dict(self) -> dict:
        return {
            "gens": [g.to_dict() for g in self.generators()],
            "order": str(self.order),
            "lattice": [[str(x) for x in row] for row in self.lattice],
            "j": str(self.j),
            "u": [str(x) for x in self.u],
        }


def subgroup_from_parts(
    F: FiniteQuotientDesc, lattice: Sequence[Sequence[int]], j: int, u: Sequence[int]
) -> FiniteSubgroup:
    """Normalize (lattice, j, u) data, e.g. read back from a certificate."""
    basis = _modulus_lattice(F, lattice)
    if F.r % j:
        raise InconsistentData(f"Image generator {j} does not divide r = {F.r}")
    if j == F.r:
        return FiniteSubgroup(F, basis, F.r, (0,) * F.n)
    basis = _close_mod(F, basis, j)
    return FiniteSubgroup(F, basis, j, lattice_reduce(tuple(u), basis))


def closure(
    F: FiniteQuotientDesc, gens: Iterable[GroupElement], cap: Optional[int] = None
) -> FiniteSubgroup:
    """Subgroup of F generated by ``gens``."""
    gens = [F.reduce(g) for g in gens]
    cyclic = [g for g in gens if g.k != 0]
    vecs: List[Vector] = [g.v for g in gens if g.k == 0]
    while len(cyclic) > 1:
        cyclic.sort(key=lambda g: (g.k, g.v))
        a, b = cyclic[0], cyclic[1]
        reduced = F.mul(b, F.power(a, -(b.k // a.k)))
        cyclic.pop(1)
        if reduced.k == 0:
            vecs.append(reduced.v)
        else:
            cyclic.append(reduced)
    if not cyclic:
        H = FiniteSubgroup(F, _modulus_lattice(F, vecs), F.r, (0,) * F.n)
    else:
        g = cyclic[0]
        j = gcd(g.k, F.r)
        g0 = F.power(g, pow(g.k // j, -1, F.r // j))
        vecs.append(F.mul(g, F.power(g0, -(g.k // j))).v)
        vecs.append(F.power(g0, F.r // j).v)
        basis = _close_mod(F, _modulus_lattice(F, vecs), j)
        H = FiniteSubgroup(F, basis, j, lattice_reduce(g0.v, basis))
    if cap is not None and H.order > cap:
        raise CapExceeded(f"Closure of order {H.order} exceeds cap {cap}")
    return H


def conjugate_subgroup(H: FiniteSubgroup, c: GroupElement) -> FiniteSubgroup:
    F = H.parent
    c_inv = F.inv(c)
    return closure(F, [F.mul(F.mul(c, h), c_inv) for h in H.generators()])


@dataclass(frozen=True)
class HyperWitness:
    """Normal cyclic C = <cyclic_gen> with |H/C| = quotient_order a power of p."""

    cyclic_gen: GroupElement
    p: int
    quotient_order: int

    def to_dict(self) -> dict:
        return {
            "cyclic_gen": self.cyclic_gen.to_dict(),
            "p": str(self.p),
            "quotient_order": str(self.quotient_order),
        }


def verify_witness(H: FiniteSubgroup, witness: HyperWitness) -> bool:
    F = H.parent
    if not H.contains(witness.cyclic_gen):
        return False
    C = closure(F, [witness.cyclic_gen])
    for h in H.generators():
        if not C.contains(F.mul(F.mul(h, witness.cyclic_gen), F.inv(h))):
            return False
    if H.order != C.order * witness.quotient_order:
        return False
    return _is_prime_power(witness.quotient_order, witness.p)


def _cyclic_generator(
    F: FiniteQuotientDesc, commuting: Sequence[GroupElement], order: int
) -> Optional[GroupElement]:
    """Generator of the abelian group spanned by ``commuting`` when it is cyclic of ``order``."""
    orders = [F.element_order(g) for g in commuting]
    exponent = lcm(1, *orders)
    if exponent != order:
        return None
    gen = F.identity()
    for ell in factorint(order):
        best = max(range(len(commuting)), key=lambda i: _prime_part(orders[i], ell))
        o = orders[best]
        gen = F.mul(gen, F.power(commuting[best], o // _prime_part(o, ell)))
    return gen


def _cyclic_witness(H: FiniteSubgroup) -> Optional[GroupElement]:
    F = H.parent
    lattice_gens = H.lattice_generators()
    if H.j != F.r and any(F.act(H.j, g.v) != g.v for g in lattice_gens):
        return None
    commuting = lattice_gens + ([H.slope] if H.j != F.r else [])
    return _cyclic_generator(F, commuting or [F.identity()], H.order)


def _lowest_p_normal(H: FiniteSubgroup, p: int) -> Tuple[Tuple[Vector, ...], GroupElement]:
    """The smallest normal subgroup with p-group quotient, as (lattice D, element x) with O = D<x>."""
    F = H.parent
    x = F.identity()
    if H.j != F.r:
        z = F.power(H.slope, _prime_part(H.image_order, p))
        m_z = F.r // gcd(z.k, F.r)
        o_z = m_z * F.vector_order(F.power(z, m_z).v)
        x = F.power(z, _prime_part(o_z, p))
    s_p = _prime_part(F.s, p)
    vectors: List[Vector] = []
    for row in H.lattice:
        vectors.append(tuple(s_p * a for a in row))
        moved = F.act(x.k, row)
        vectors.append(tuple(a - b for a, b in zip(row, moved)))
    return _modulus_lattice(F, vectors), x


def _op_witness(H: FiniteSubgroup, p: int) -> Optional[GroupElement]:
    F = H.parent
    D, x = _lowest_p_normal(H, p)
    d_gens = [GroupElement(tuple(a % F.s for a in row), 0) for row in D]
    d_gens = [g for g in d_gens if any(g.v)]
    if any(F.act(x.k, g.v) != g.v for g in d_gens):
        return None
    d_order = F.s**F.n // lattice_index(D, F.n)
    x_order = F.element_order(x)
    m_x = F.r // gcd(x.k, F.r)
    y0 = F.power(x, m_x).v
    y0_order = F.vector_order(y0)
    t_min = next(
        t for t in divisors(y0_order) if lattice_contains(D, tuple(t * a for a in y0))
    )
    meet = y0_order // t_min
    order = d_order * x_order // meet
    return _cyclic_generator(F, d_gens + [x], order)


def is_hyperelementary(H: FiniteSubgroup) -> Optional[HyperWitness]:
    """Witness that H has a normal cyclic subgroup of prime-power index, or None.

    For each prime p the candidate is the smallest normal subgroup with
    p-group quotient, generated by the p'-part of the lattice, the
    commutators with a p'-element x lifting the p'-part of the image, and x.
    H is hyper-elementary exactly when one of these is cyclic.
    """
    order = H.order
    primes = sorted(factorint(order)) or [2]
    gen = _cyclic_witness(H)
    if gen is not None:
        witness = HyperWitness(gen, primes[0], 1)
    else:
        witness = None
        for p in primes:
            gen = _op_witness(H, p)
            if gen is not None:
                witness = HyperWitness(gen, p, order // H.parent.element_order(gen))
                break
    if witness is not None and not verify_witness(H, witness):
        raise InconsistentData(f"Constructed witness {witness} failed verification")
    return witness


def is_hyperelementary_by_scan(H: FiniteSubgroup, cap: int = 20_000) -> Optional[HyperWitness]:
    """Element-level search over cyclic subgroups; exhaustive and slow."""
    F = H.parent
    elements = H.materialize(cap)
    order = len(elements)
    gens = H.generators()
    for g in sorted(elements, key=lambda e: (-F.element_order(e), e)):
        o = F.element_order(g)
        quotient = order // o
        primes = list(factorint(quotient))
        if len(primes) > 1:
            continue
        cyclic: Set[GroupElement] = set()
        x = F.identity()
        for _ in range(o):
            cyclic.add(x)
            x = F.mul(x, g)
        if all(F.mul(F.mul(h, g), F.inv(h)) in cyclic for h in gens):
            return HyperWitness(g, primes[0] if primes else 2, quotient)
    return None


def invariant_lattices(F: FiniteQuotientDesc) -> List[Tuple[Vector, ...]]:
    """All subgroups of (Z/s)^n, as preimage lattices."""
    cyclic = sorted({_modulus_lattice(F, [v]) for v in product(range(F.s), repeat=F.n)})
    found = {_modulus_lattice(F, [])}
    frontier = list(found)
    while frontier:
        nxt = []
        for L in frontier:
            for C in cyclic:
                J = _modulus_lattice(F, list(L) + list(C))
                if J not in found:
                    found.add(J)
                    nxt.append(J)
        frontier = nxt
    return sorted(found)


def enumerate_subgroups(F: FiniteQuotientDesc, cap: int = 20_000) -> List[FiniteSubgroup]:
    """Every subgroup of F, each listed once."""
    if F.order > cap:
        raise CapExceeded(f"|F| = {F.order} exceeds exhaustive cap {cap}")
    zero = (0,) * F.n
    out = []
    for L in invariant_lattices(F):
        reps = sorted({lattice_reduce(v, L) for v in product(range(F.s), repeat=F.n)})
        for j in divisors(F.r):
            if j == F.r:
                out.append(FiniteSubgroup(F, L, F.r, zero))
                continue
            if not all(lattice_contains(L, F.act(j, w)) for w in L):
                continue
            for u in reps:
                if lattice_contains(L, F.power(GroupElement(u, j), F.r // j).v):
                    out.append(FiniteSubgroup(F, L, j, u))
    logger.info(f"Enumerated {len(out)} subgroups of F of order {F.order}")
    return out


def enumerate_subgroups_naive(F: FiniteQuotientDesc, cap: int = 2_000) -> Set[frozenset]:
    """Subgroup lattice by joining cyclic subgroups on explicit element sets."""
    if F.order > cap:
        raise CapExceeded(f"|F| = {F.order} exceeds naive cap {cap}")

    def generated(gens: Iterable[GroupElement]) -> frozenset:
        seen = {F.identity()}
        frontier = list(seen)
        gens = list(gens)
        while frontier:
            nxt = []
            for x in frontier:
                for g in gens:
                    y = F.mul(x, g)
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        return frozenset(seen)

    elements = list(F.elements())
    cyclic = {generated([g]) for g in elements}
    found = {frozenset([F.identity()])}
    frontier = list(found)
    while frontier:
        nxt = []
        for H in frontier:
            for C in cyclic:
                if C <= H:
                    continue
                J = generated(list(H) + list(C))
                if J not in found:
                    found.add(J)
                    nxt.append(J)
        frontier = nxt
    return found


def enumerate_hyperelementary(
    F: FiniteQuotientDesc,
    cap: int = 20_000,
    mode: str = "exhaustive",
    samples: int = 100,
    seed: int = 0,
    max_attempts: Optional[int] = None,
) -> List[FiniteSubgroup]:
    """Hyper-elementary subgroups of F, exhaustively or by seeded sampling.

    Sampling draws one to three random elements, each raised to a random
    divisor of r, and keeps the distinct hyper-elementary closures.
    """
    if mode == "exhaustive":
        return [H for H in enumerate_subgroups(F, cap) if is_hyperelementary(H) is not None]
    if mode != "sampling":
        raise PreconditionFailed(f"Unknown enumeration mode {mode!r}")

    rng = np.random.default_rng(seed)
    exponents = [int(d) for d in divisors(F.r)]
    attempts = max_attempts or samples * 50
    seen: Dict[FiniteSubgroup, None] = {}
    for _ in range(attempts):
        if len(seen) >= samples:
            break
        gens = []
        for _ in range(int(rng.integers(1, 4))):
            v = tuple(int(x) for x in rng.integers(0, F.s, size=F.n))
            g = GroupElement(v, int(rng.integers(0, F.r)))
            gens.append(F.power(g, exponents[int(rng.integers(0, len(exponents)))]))
        H = closure(F, gens)
        if H not in seen and is_hyperelementary(H) is not None:
            seen[H] = None
    if len(seen) < samples:
        logger.warning(f"Sampling found {len(seen)} of {samples} requested subgroups")
    return list(seen)


class PreimageCondition(str, Enum):
    """Which inclusion holds for the preimage of a hyper-elementary subgroup."""

    LATTICE = "lattice"
    IMAGE = "image"
    BOTH = "both"


def check_lemma_hyp_elm(
    F: FiniteQuotientDesc,
    H: FiniteSubgroup,
    p1: int,
    p2: int,
    witness: Optional[HyperWitness] = None,
) -> Tuple[int, PreimageCondition]:
    """Find q in {p1, p2} for which the preimage of H lies in (qZ)^n or maps into qZ.

    A supplied ``witness`` is checked with ``verify_witness``; without one,
    H is tested with ``is_hyperelementary``.

    Raises:
        PreconditionFailed: If s, r and the primes do not fit.
        HypothesisViolated: If H is not hyper-elementary.
        LemmaFalsified: If neither prime works.
    """
    if F.s != p1 * p2 or F.r != F.s * F.A_order:
        raise PreconditionFailed(
            f"Need s = p1*p2 and r = s*|A_s|, got s={F.s}, r={F.r}, p1={p1}, p2={p2}"
        )
    hyper = verify_witness(H, witness) if witness is not None else is_hyperelementary(H) is not None
    if not hyper:
        raise HypothesisViolated(
            f"Subgroup {H.to_dict()} is not hyper-elementary", {"subgroup": H.to_dict()}
        )
    for q in (p1, p2):
        lattice_ok = all(a % q == 0 for row in H.lattice for a in row)
        image_ok = H.j % q == 0
        if lattice_ok and image_ok:
            return q, PreimageCondition.BOTH
        if lattice_ok:
            return q, PreimageCondition.LATTICE
        if image_ok:
            return q, PreimageCondition.IMAGE
    raise LemmaFalsified(
        f"No q in {{{p1}, {p2}}} works for hyper-elementary subgroup {H.to_dict()}",
        {"subgroup": H.to_dict(), "p1": p1, "p2": p2},
    )


def find_lemma_prime_power(F: FiniteQuotientDesc, C: FiniteSubgroup) -> Tuple[int, int]:
    """Prime power q^N dividing r but not |image of C|, with q dividing |C n (Z/s)^n|."""
    if _cyclic_witness(C) is None:
        raise PreconditionFailed("Subgroup is not cyclic")
    if C.intersection_order == 1:
        raise PreconditionFailed("Cyclic subgroup meets the lattice part trivially")
    for q in sorted(factorint(F.r)):
        if C.intersection_order % q:
            continue
        N = 1
        while F.r % q**N == 0:
            if C.image_order % q**N:
                return q, N
            N += 1
    raise LemmaFalsified(
        f"No prime power witness for cyclic subgroup {C.to_dict()}",
        {"subgroup": C.to_dict()},
    )


def cyclic_subgroups(F: FiniteQuotientDesc, cap: int = 20_000) -> List[FiniteSubgroup]:
    if F.order > cap:
        raise CapExceeded(f"|F| = {F.order} exceeds exhaustive cap {cap}")
    return sorted(
        {closure(F, [g]) for g in F.elements()},
        key=lambda H: (H.order, H.lattice, H.j, H.u),
    )
