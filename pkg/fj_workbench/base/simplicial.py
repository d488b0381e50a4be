"""Simplicial complexes with the global l1-metric, actions, covers and nerves."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations, permutations
from threading import Lock
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Hashable,
    Iterable,
    List,
    Mapping,
    Optional,
    Protocol,
    Sequence,
    Tuple,
    Union,
)

from fj_workbench.base.group_core import (
    GroupElement,
    SemidirectProduct,
    Subgroup,
)
from fj_workbench.errors import NoCover, OrbitNotSimplex, PreconditionFailed

logger = logging.getLogger("fjwb.simplicial")

Vertex = Hashable
Weight = Union[Fraction, float]
Word = Sequence[Tuple[str, int]]

FLOAT_TOLERANCE = 1e-9


def _vertex_key(v: Vertex) -> Tuple[str, str]:
    return type(v).__name__, repr(v)


@dataclass(frozen=True)
class SPoint:
    """Point of a simplicial complex in barycentric coordinates.

    Zero weights are dropped and the remaining pairs are kept in a fixed
    order, so two equal points compare and hash equal.
    """

    coords: Tuple[Tuple[Vertex, Weight], ...]

    @classmethod
    def from_weights(cls, weights: Mapping[Vertex, Weight]) -> "SPoint":
        merged: Dict[Vertex, Weight] = {}
        for v, w in weights.items():
            if w < 0:
                raise PreconditionFailed(f"Negative barycentric weight {w} at {v!r}")
            if w:
                merged[v] = merged.get(v, 0) + w
        total = sum(merged.values())
        exact = all(isinstance(w, (int, Fraction)) for w in merged.values())
        if (exact and total != 1) or (not exact and abs(total - 1) > FLOAT_TOLERANCE):
            raise PreconditionFailed(f"Barycentric weights sum to {total}, not 1")
        return cls(tuple(sorted(merged.items(), key=lambda item: _vertex_key(item[0]))))

    @classmethod
    def vertex(cls, v: Vertex) -> "SPoint":
        return cls(((v, Fraction(1)),))

    @classmethod
    def barycenter(cls, vertices: Iterable[Vertex]) -> "SPoint":
        vertices = list(dict.fromkeys(vertices))
        if not vertices:
            raise PreconditionFailed("Barycenter of an empty simplex")
        w = Fraction(1, len(vertices))
        return cls.from_weights({v: w for v in vertices})

    @property
    def weights(self) -> Dict[Vertex, Weight]:
        return dict(self.coords)

    @property
    def support(self) -> FrozenSet[Vertex]:
        return frozenset(v for v, _ in self.coords)

    def weight(self, v: Vertex) -> Weight:
        return self.weights.get(v, 0)

    def relabel(self, fn: Callable[[Vertex], Vertex]) -> "SPoint":
        moved: Dict[Vertex, Weight] = {}
        for v, w in self.coords:
            u = fn(v)
            moved[u] = moved.get(u, 0) + w
        return SPoint.from_weights(moved)

    def to_dict(self) -> dict:
        return {"coords": [[_json_vertex(v), str(w)] for v, w in self.coords]}


def _json_vertex(v: Any) -> Any:
    if isinstance(v, GroupElement):
        return v.to_dict()
    if isinstance(v, (tuple, list, frozenset)):
        return [_json_vertex(x) for x in v]
    if isinstance(v, (int, Fraction)):
        return str(v)
    return v


def l1_distance(z: SPoint, z_prime: SPoint) -> Weight:
    """Sum over all vertices of |z_v - z'_v|; points on different components are 2 apart."""
    a, b = z.weights, z_prime.weights
    return sum((abs(a.get(v, 0) - b.get(v, 0)) for v in a.keys() | b.keys()), Fraction(0))


class Complex(Protocol):
    """Anything that can decide whether a vertex set spans a simplex."""

    def is_simplex(self, vertices: Iterable[Vertex]) -> bool: ...


@dataclass(frozen=True)
class SimplicialComplex:
    """Finite face-closed family of vertex sets."""

    vertices: FrozenSet[Vertex]
    simplices: FrozenSet[FrozenSet[Vertex]]

    @classmethod
    def from_maximal(cls, maximal: Iterable[Iterable[Vertex]]) -> "SimplicialComplex":
        faces = set()
        for top in maximal:
            top = tuple(dict.fromkeys(top))
            for size in range(1, len(top) + 1):
                faces.update(frozenset(c) for c in combinations(top, size))
        return cls(frozenset(v for face in faces for v in face), frozenset(faces))

    def is_simplex(self, vertices: Iterable[Vertex]) -> bool:
        return frozenset(vertices) in self.simplices

    @property
    def dimension(self) -> int:
        return max((len(s) for s in self.simplices), default=0) - 1

    def faces_of_dim(self, d: int) -> List[FrozenSet[Vertex]]:
        return sorted(
            (s for s in self.simplices if len(s) == d + 1),
            key=lambda s: sorted(map(_vertex_key, s)),
        )

    def maximal_simplices(self) -> List[FrozenSet[Vertex]]:
        return [
            s for s in self.simplices if not any(s < t for t in self.simplices if len(t) > len(s))
        ]

    def to_dict(self) -> dict:
        maximal = sorted(
            (sorted(map(_json_vertex, s), key=repr) for s in self.maximal_simplices()), key=repr
        )
        return {
            "vertices": sorted((_json_vertex(v) for v in self.vertices), key=repr),
            "maximal_simplices": maximal,
            "dimension": self.dimension,
        }


class LineComplex:
    """The real line triangulated at the integers, materialized on demand."""

    rule = "line"

    def is_simplex(self, vertices: Iterable[Vertex]) -> bool:
        vs = sorted(set(vertices))
        if not vs or not all(isinstance(v, int) for v in vs):
            return False
        return len(vs) == 1 or (len(vs) == 2 and vs[1] - vs[0] == 1)

    @property
    def dimension(self) -> int:
        return 1

    def point(self, xi: Fraction) -> SPoint:
        """The point of the line at real coordinate ``xi``."""
        xi = Fraction(xi)
        m = xi.numerator // xi.denominator
        t = xi - m
        return SPoint.from_weights({m: 1 - t, m + 1: t})

    def coordinate(self, z: SPoint) -> Fraction:
        return sum((Fraction(v) * w for v, w in z.coords), Fraction(0))

    def window(self, lo: int, hi: int) -> SimplicialComplex:
        return SimplicialComplex.from_maximal([(m, m + 1) for m in range(lo, hi)] or [(lo,)])

    def to_dict(self) -> dict:
        return {"rule": self.rule}


def subdivide(E: SimplicialComplex) -> SimplicialComplex:
    """First barycentric subdivision; its vertices are the simplices of E."""
    flags = set()
    for top in E.maximal_simplices():
        for order in permutations(sorted(top, key=_vertex_key)):
            flags.add(tuple(frozenset(order[: i + 1]) for i in range(len(order))))
    return SimplicialComplex.from_maximal(flags)


class FamilyTag(str, Enum):
    TRIVIAL = "trivial"
    CYCLIC = "cyclic"
    ABELIAN = "abelian"
    VIRTUALLY_CYCLIC = "virtually-cyclic"
    OTHER = "other"


FAMILY_MEMBERS = {
    FamilyTag.TRIVIAL: {"Fin", "Cyc", "VCyc", "Ab"},
    FamilyTag.CYCLIC: {"Cyc", "VCyc", "Ab"},
    FamilyTag.VIRTUALLY_CYCLIC: {"VCyc"},
    FamilyTag.ABELIAN: {"Ab"},
    FamilyTag.OTHER: set(),
}


def in_family(tag: FamilyTag, family: str) -> bool:
    return family == "All" or family in FAMILY_MEMBERS[tag]


def classify_subgroup(G: SemidirectProduct, H: Subgroup) -> FamilyTag:
    """Most specific family of a subgroup of the torsion-free group Z^n semidirect Z.

    H = L semidirect <u t^d> has Hirsch length rank(L) + (1 if d else 0), so
    it is cyclic exactly when that is at most 1. Torsion-freeness makes
    virtually cyclic the same as trivial or infinite cyclic, so
    VIRTUALLY_CYCLIC is never the most specific answer. u t^d acts on L by
    A^d, so H is abelian exactly when A^d fixes every vector of L.
    """
    rank = len(H.lattice)
    if rank == 0 and H.slope is None:
        return FamilyTag.TRIVIAL
    if (H.slope is None and rank == 1) or (H.slope is not None and rank == 0):
        return FamilyTag.CYCLIC
    if H.slope is None:
        return FamilyTag.ABELIAN
    twist = G.A.power(H.slope[1])
    if all(twist.apply(w) == w for w in H.lattice):
        return FamilyTag.ABELIAN
    return FamilyTag.OTHER


class SimplicialAction:
    """Group action on vertices given per generator by a map and its inverse."""

    def __init__(
        self,
        generators: Mapping[str, Callable[[Vertex], Vertex]],
        inverses: Mapping[str, Callable[[Vertex], Vertex]],
    ):
        if set(generators) != set(inverses):
            raise PreconditionFailed("Every generator needs an inverse map")
        self.generators = dict(generators)
        self.inverses = dict(inverses)

    @classmethod
    def from_permutations(cls, perms: Mapping[str, Mapping[Vertex, Vertex]]) -> "SimplicialAction":
        gens, invs = {}, {}
        for name, perm in perms.items():
            perm = dict(perm)
            inverse = {b: a for a, b in perm.items()}
            if len(inverse) != len(perm):
                raise PreconditionFailed(f"Generator {name} is not a permutation")
            gens[name] = lambda v, p=perm: p.get(v, v)
            invs[name] = lambda v, p=inverse: p.get(v, v)
        return cls(gens, invs)

    def act_vertex(self, word: Word, v: Vertex) -> Vertex:
        """Apply ``word`` = g1^e1 ... gk^ek, rightmost letter first."""
        for name, exp in reversed(list(word)):
            fn = self.generators[name] if exp > 0 else self.inverses[name]
            for _ in range(abs(exp)):
                v = fn(v)
        return v

    def act(self, word: Word, z: SPoint) -> SPoint:
        return z.relabel(lambda v: self.act_vertex(word, v))

    def is_simplicial(self, E: SimplicialComplex) -> bool:
        for name in self.generators:
            for exp in (1, -1):
                for s in E.simplices:
                    image = frozenset(self.act_vertex([(name, exp)], v) for v in s)
                    if len(image) != len(s) or not E.is_simplex(image):
                        return False
        return True


def fixed_simplex(action: SimplicialAction, E: Complex, word: Word, x: SPoint, N: int) -> SPoint:
    """Barycenter of a g-invariant simplex near x, for g moving x by less than 1/(N+1).

    Raises:
        PreconditionFailed: If d1(x, g x) >= 1/(N+1).
        OrbitNotSimplex: If the orbit of a heavy vertex does not span a simplex.
    """
    bound = Fraction(1, N + 1)
    moved = l1_distance(x, action.act(word, x))
    if moved >= bound:
        raise PreconditionFailed(f"d1(x, g x) = {moved} is not below 1/(N+1) = {bound}")
    v = max(x.coords, key=lambda item: item[1])[0]
    orbit = [v]
    u = action.act_vertex(word, v)
    while u != v:
        orbit.append(u)
        if len(orbit) > N + 1:
            raise OrbitNotSimplex(f"Orbit of {v!r} has more than {N + 1} vertices")
        u = action.act_vertex(word, u)
    if not E.is_simplex(orbit):
        raise OrbitNotSimplex(f"Orbit {orbit!r} does not span a simplex")
    center = SPoint.barycenter(orbit)
    if action.act(word, center) != center:
        raise OrbitNotSimplex(f"Barycenter of orbit {orbit!r} is not fixed")
    return center


class CoverFamily(Protocol):
    """Open cover with decidable membership and a finite window of members."""

    def members_containing(self, x: Any) -> List[Hashable]: ...

    def distance_to_complement(self, key: Hashable, x: Any) -> Weight: ...

    def intersects(self, keys: Sequence[Hashable]) -> bool: ...

    def window(self) -> List[Hashable]: ...


@dataclass
class IntervalCover:
    """Finite cover of the line by open intervals."""

    intervals: Dict[Hashable, Tuple[Fraction, Fraction]]

    def members_containing(self, x: Any) -> List[Hashable]:
        return [k for k, (a, b) in self.intervals.items() if a < x < b]

    def distance_to_complement(self, key: Hashable, x: Any) -> Weight:
        a, b = self.intervals[key]
        return max(0, min(x - a, b - x))

    def intersects(self, keys: Sequence[Hashable]) -> bool:
        return max(self.intervals[k][0] for k in keys) < min(self.intervals[k][1] for k in keys)

    def window(self) -> List[Hashable]:
        return list(self.intervals)


@dataclass
class FiniteSetCover:
    """Cover of a finite set by subsets, with the discrete metric."""

    members: Dict[Hashable, FrozenSet[Hashable]]

    def members_containing(self, x: Any) -> List[Hashable]:
        return [k for k, m in self.members.items() if x in m]

    def distance_to_complement(self, key: Hashable, x: Any) -> Weight:
        return Fraction(int(x in self.members[key]))

    def intersects(self, keys: Sequence[Hashable]) -> bool:
        return bool(frozenset.intersection(*(self.members[k] for k in keys)))

    def window(self) -> List[Hashable]:
        return list(self.members)


def nerve(cover: CoverFamily, max_dim: Optional[int] = None) -> SimplicialComplex:
    """Nerve of the cover restricted to its window of members."""
    keys = cover.window()
    position = {k: i for i, k in enumerate(keys)}
    level = [(k,) for k in keys]
    faces: List[Tuple[Hashable, ...]] = list(level)
    while level and (max_dim is None or len(level[0]) <= max_dim):
        nxt = []
        for face in level:
            for k in keys[position[face[-1]] + 1 :]:
                candidate = face + (k,)
                if cover.intersects(candidate):
                    nxt.append(candidate)
        faces.extend(nxt)
        level = nxt
    return SimplicialComplex(frozenset(keys), frozenset(frozenset(f) for f in faces))


def pou_map(cover: CoverFamily, x: Any) -> SPoint:
    """Point of the nerve with weights proportional to distance to each complement.

    Raises:
        NoCover: If x lies in no member.
    """
    weights = {k: cover.distance_to_complement(k, x) for k in cover.members_containing(x)}
    total = sum(weights.values())
    if not weights or total == 0:
        raise NoCover(f"Point {x!r} lies in no cover member")
    return SPoint.from_weights({k: w / total for k, w in weights.items()})


FiberAction = Callable[[GroupElement, Vertex], Vertex]


@dataclass
class InducedComplex:
    """G x_H E: pairs (g, e) modulo (g h, e) ~ (g, h e), stored with g a canonical coset rep."""

    G: SemidirectProduct
    subgroup: Subgroup
    fiber: Complex
    fiber_action: FiberAction
    _cache: Dict[GroupElement, Tuple[GroupElement, GroupElement]] = field(
        default_factory=dict, repr=False
    )
    _lock: Lock = field(default_factory=Lock, repr=False)

    def _decompose(self, g: GroupElement) -> Tuple[GroupElement, GroupElement]:
        with self._lock:
            hit = self._cache.get(g)
        if hit is None:
            hit = self.G.decompose(self.subgroup, g)
            with self._lock:
                self._cache[g] = hit
        return hit

    def canonical_vertex(self, g: GroupElement, e: Vertex) -> Tuple[GroupElement, Vertex]:
        rep, h = self._decompose(g)
        return rep, self.fiber_action(h, e)

    def point(self, g: GroupElement, z: SPoint) -> SPoint:
        """The class of (g, z)."""
        rep, h = self._decompose(g)
        return z.relabel(lambda e: (rep, self.fiber_action(h, e)))

    def act(self, g: GroupElement, z: SPoint) -> SPoint:
        return z.relabel(lambda ve: self.canonical_vertex(self.G.mul(g, ve[0]), ve[1]))

    def is_simplex(self, vertices: Iterable[Vertex]) -> bool:
        vs = list(vertices)
        reps = {v[0] for v in vs}
        return len(reps) == 1 and self.fiber.is_simplex(v[1] for v in vs)

    def well_defined_on(self, samples: Iterable[Tuple[GroupElement, GroupElement, SPoint]]) -> bool:
        """Check point(g h, z) == point(g, h z) for sampled (g, h, z) with h in the subgroup."""
        for g, h, z in samples:
            left = self.point(self.G.mul(g, h), z)
            right = self.point(g, z.relabel(lambda e: self.fiber_action(h, e)))
            if left != right:
                logger.warning(f"Induced point mismatch for g={g}, h={h}")
                return False
        return True

    def to_dict(self) -> dict:
        fiber = self.fiber.to_dict() if hasattr(self.fiber, "to_dict") else repr(self.fiber)
        return {"rule": "induced", "subgroup": self.subgroup.to_dict(), "fiber": fiber}


def induce(
    G: SemidirectProduct, subgroup: Subgroup, fiber: Complex, fiber_action: FiberAction
) -> InducedComplex:
    return InducedComplex(G, subgroup, fiber, fiber_action)
