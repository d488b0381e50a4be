"""Equivariant contracting maps from Z^n semidirect Z into simplicial complexes.

Two constructions:

* the line map F(v t^k) = k/l, equivariant for Z^n semidirect lZ acting on
  the line by translation;
* the cover map F = pou o F0 with F0(v t^k) = (v/q, k), equivariant for
  (qZ)^n semidirect Z, whose target is the nerve of a G-invariant cover of
  R^n x R (boxes in the frame A^-m, or slabs in the flow direction).

A map is turned into a map on a coset space G / pi^-1(H) by inducing up.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import ceil, floor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fj_workbench.base.group_core import (
    GeneratingSet,
    GroupElement,
    IntMatrix,
    SemidirectProduct,
    Subgroup,
    Vector,
)
from fj_workbench.base.simplicial import (
    FamilyTag,
    InducedComplex,
    LineComplex,
    SPoint,
    classify_subgroup,
    in_family,
    induce,
    l1_distance,
    pou_map,
)
from fj_workbench.errors import (
    ContractionFailed,
    DescentFailed,
    EquivarianceFailed,
    PreconditionFailed,
    SearchBudgetExceeded,
)

logger = logging.getLogger("fjwb.contracting")

AmbientPoint = Tuple[Tuple[Fraction, ...], Fraction]


def letters(G: SemidirectProduct, S: GeneratingSet) -> List[GroupElement]:
    """S together with its inverses, without repeats."""
    out: List[GroupElement] = []
    for s in S.elements:
        for g in (s, G.inv(s)):
            if g not in out:
                out.append(g)
    return out


def minimal_line_scale(S: GeneratingSet, eps: Fraction) -> int:
    """Least l with 2 max|k_s| / l <= eps."""
    top = S.max_k()
    if top == 0:
        return 1
    return max(1, ceil(Fraction(2 * top) / Fraction(eps)))


@dataclass
class LineMap:
    """F(v t^k) = k/l on the line, equivariant for Z^n semidirect lZ."""

    G: SemidirectProduct
    l: int
    fiber: LineComplex = field(default_factory=LineComplex)
    report: Dict[str, Any] = field(default_factory=dict)

    @property
    def subgroup(self) -> Subgroup:
        n = self.G.n
        rows = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        return Subgroup(n, rows, ((0,) * n, self.l))

    def __call__(self, g: GroupElement) -> SPoint:
        return self.fiber.point(Fraction(g.k, self.l))

    def fiber_action(self, h: GroupElement, vertex: int) -> int:
        return vertex + h.k // self.l

    @property
    def kind(self) -> str:
        return "line"


def build_prop_Z(
    G: SemidirectProduct, l: int, S: GeneratingSet, eps: Any, samples: int = 1000, seed: int = 0
) -> LineMap:
    """Line map with scale l, its equivariance and distance bound checked.

    F depends only on k and t^l translates the line, which preserves d1, so
    the bound is checked exactly on the l |S u S^-1| pairs (t^k0, t^k0 s)
    with k0 in {0..l-1}. Equivariance F(h g) = h F(g) is checked on sampled
    pairs.
    """
    if l < 1:
        raise PreconditionFailed(f"Scale l must be positive, got {l}")
    eps = Fraction(eps)
    F = LineMap(G, l)
    rng = np.random.default_rng(seed)

    def random_element(k_range: int) -> GroupElement:
        v = tuple(int(x) for x in rng.integers(-5, 6, size=G.n))
        return GroupElement(v, int(rng.integers(-k_range, k_range + 1)))

    equivariant = 0
    for _ in range(samples):
        g = random_element(4 * l)
        h = GroupElement(random_element(0).v, l * int(rng.integers(-3, 4)))
        if F(G.mul(h, g)) != F(g).relabel(lambda m: F.fiber_action(h, m)):
            raise EquivarianceFailed(f"Line map is not equivariant at g={g}, h={h}")
        equivariant += 1

    per_letter: Dict[str, Fraction] = {}
    pairs = 0
    for s in letters(G, S):
        worst_s = Fraction(0)
        for k0 in range(l):
            g0 = GroupElement((0,) * G.n, k0)
            worst_s = max(worst_s, Fraction(l1_distance(F(g0), F(G.mul(g0, s)))))
            pairs += 1
        per_letter[str(s.k)] = max(per_letter.get(str(s.k), Fraction(0)), worst_s)
    worst = max(per_letter.values(), default=Fraction(0))
    F.report = {
        "construction": "line",
        "l": l,
        "eps": str(eps),
        "bound": str(worst),
        "bound_per_letter": {k: str(v) for k, v in per_letter.items()},
        "pairs_checked": pairs,
        "equivariance_checked": equivariant,
        "passed": worst <= eps,
        "isotropy_family": FamilyTag.ABELIAN.value,
        "dimension": 1,
    }
    return F


class BoxCover:
    """Cover of R^n x R by V_{w,m} = {|xi - m| < R, A^-m x in w + (-rho, 1 + rho)^n}.

    Distance to the complement uses W * (inf-distance to the box boundary in
    the frame A^-m), capped by the distance R - |xi - m| in the flow direction.
    """

    kind = "box"

    def __init__(self, A: IntMatrix, R: int, W: Fraction, rho: Fraction = Fraction(1, 2)):
        if not 0 < rho < 1:
            raise PreconditionFailed(f"Margin rho must lie in (0, 1), got {rho}")
        self.A, self.R, self.W, self.rho = A, R, Fraction(W), Fraction(rho)

    def _frames(self, xi: Fraction) -> List[int]:
        return [m for m in range(floor(xi - self.R), ceil(xi + self.R) + 1) if abs(xi - m) < self.R]

    def members_containing(self, p: AmbientPoint) -> List[Tuple[Vector, int]]:
        x, xi = p
        keys = []
        for m in self._frames(xi):
            y = self.A.power(-m).apply(x)
            ranges = [
                range(floor(c - 1 - self.rho) + 1, ceil(c + self.rho)) for c in y
            ]
            keys.extend((tuple(w), m) for w in product(*ranges))
        return keys

    def distance_to_complement(self, key: Tuple[Vector, int], p: AmbientPoint) -> Fraction:
        w, m = key
        x, xi = p
        y = [c - b for c, b in zip(self.A.power(-m).apply(x), w)]
        box = min(min(c + self.rho, 1 + self.rho - c) for c in y)
        return max(Fraction(0), min(self.W * box, self.R - abs(xi - m)))

    def act(self, g: Tuple[Tuple[Fraction, ...], int], key: Tuple[Vector, int]) -> Tuple[Vector, int]:
        v, k = g
        w, m = key
        shift = self.A.power(-(m + k)).apply(v)
        return tuple(int(a + b) for a, b in zip(w, shift)), m + k

    def stabilizer(self, n: int) -> Subgroup:
        return Subgroup(n, (), None)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "R": self.R, "W": str(self.W), "rho": str(self.rho)}


class SlabCover:
    """Cover of R^n x R by slabs R^n x (m - R, m + R), m in Z."""

    kind = "slab"

    def __init__(self, R: int):
        if R < 1:
            raise PreconditionFailed(f"Slab half-width must be positive, got {R}")
        self.R = R

    def members_containing(self, p: AmbientPoint) -> List[int]:
        _, xi = p
        return [m for m in range(floor(xi - self.R), ceil(xi + self.R) + 1) if abs(xi - m) < self.R]

    def distance_to_complement(self, m: int, p: AmbientPoint) -> Fraction:
        return max(Fraction(0), self.R - abs(p[1] - m))

    def intersects(self, keys: Sequence[int]) -> bool:
        return max(keys) - min(keys) < 2 * self.R

    def window(self) -> List[int]:
        return list(range(-2 * self.R, 2 * self.R + 1))

    def act(self, g: Tuple[Tuple[Fraction, ...], int], m: int) -> int:
        return m + g[1]

    def stabilizer(self, n: int) -> Subgroup:
        rows = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        return Subgroup(n, rows, None)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "R": self.R}


def ambient_act(A: IntMatrix, g: Tuple[Sequence[Fraction], int], p: AmbientPoint) -> AmbientPoint:
    """v t^k (x, xi) = (v + A^k x, xi + k)."""
    v, k = g
    x, xi = p
    return tuple(a + b for a, b in zip(v, A.power(k).apply(x))), xi + k


@dataclass
class CoverMap:
    """F = pou o F0 into the nerve of a cover, equivariant for (qZ)^n semidirect Z."""

    G: SemidirectProduct
    q: int
    cover: Any
    report: Dict[str, Any] = field(default_factory=dict)

    @property
    def subgroup(self) -> Subgroup:
        n = self.G.n
        rows = tuple(tuple(self.q * int(i == j) for j in range(n)) for i in range(n))
        return Subgroup(n, rows, ((0,) * n, 1))

    @property
    def kind(self) -> str:
        return self.cover.kind

    @property
    def fiber(self) -> Any:
        return self.cover

    def ambient(self, g: GroupElement) -> AmbientPoint:
        return tuple(Fraction(a, self.q) for a in g.v), Fraction(g.k)

    def __call__(self, g: GroupElement) -> SPoint:
        return pou_map(self.cover, self.ambient(g))

    def fiber_action(self, h: GroupElement, key: Any) -> Any:
        scaled = tuple(Fraction(a, self.q) for a in h.v)
        return self.cover.act((scaled, h.k), key)


def check_cover_invariance(
    G: SemidirectProduct, cover: Any, samples: int = 100, seed: int = 0
) -> bool:
    """Exact check that g V_key = V_{g key} on random rational points and elements."""
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = tuple(Fraction(int(a), 7) for a in rng.integers(-20, 21, size=G.n))
        xi = Fraction(int(rng.integers(-30, 31)), 5)
        g = (tuple(Fraction(int(a)) for a in rng.integers(-3, 4, size=G.n)), int(rng.integers(-2, 3)))
        p = (x, xi)
        moved = ambient_act(G.A, g, p)
        before = {cover.act(g, key): cover.distance_to_complement(key, p) for key in cover.members_containing(p)}
        after = {key: cover.distance_to_complement(key, moved) for key in cover.members_containing(moved)}
        if before != after:
            logger.warning(f"Cover invariance fails at point {p} under {g}")
            return False
    return True


def build_prop_Zn(
    G: SemidirectProduct,
    q: int,
    S: GeneratingSet,
    eps: Any,
    kind: str = "box",
    R: int = 2,
    W: Any = 1,
    rho: Any = Fraction(1, 2),
) -> CoverMap:
    """Cover map with an exact check on the q^n |S u S^-1| pairs (g0, g0 s), g0 = (v0, 0).

    Every g is h g0 with h in (qZ)^n semidirect Z and v0 in {0..q-1}^n, and
    the action on the nerve is simplicial, so the pairs checked cover all g.

    Raises:
        ContractionFailed: With the worst pair when some pair exceeds eps.
    """
    if q < 2:
        raise PreconditionFailed(f"q must be at least 2, got {q}")
    eps = Fraction(eps)
    cover = BoxCover(G.A, R, Fraction(W), Fraction(rho)) if kind == "box" else SlabCover(R)
    F = CoverMap(G, q, cover)
    values = []
    dimension = 0
    for v0 in product(range(q), repeat=G.n):
        g0 = GroupElement(tuple(v0), 0)
        z0 = F(g0)
        dimension = max(dimension, len(z0.coords) - 1)
        for s in letters(G, S):
            z1 = F(G.mul(g0, s))
            dimension = max(dimension, len(z1.coords) - 1)
            d = l1_distance(z0, z1)
            values.append({"g0": list(v0), "s": s.to_dict(), "d1": str(d)})
            if d > eps:
                raise ContractionFailed(
                    f"{cover.kind} cover map moves {g0} by {d} > eps under {s}",
                    {"pair": values[-1], "cover": cover.to_dict()},
                )
    isotropy = classify_subgroup(G, cover.stabilizer(G.n))
    F.report = {
        "construction": "cover",
        "q": q,
        "cover": cover.to_dict(),
        "eps": str(eps),
        "pairs_checked": len(values),
        "worst": str(max((Fraction(v["d1"]) for v in values), default=Fraction(0))),
        "pairs": values,
        "isotropy_family": isotropy.value,
        "in_cyc": in_family(isotropy, "Cyc"),
        "dimension": dimension,
        "passed": True,
    }
    logger.info(f"Cover map passed: q={q}, cover={cover.to_dict()}, worst={F.report['worst']}")
    return F


BOX_RADII = (1, 2, 4, 8)
BOX_WEIGHTS = (1, 2, 4, 8, 16, 32, 64)


def search_prop_Zn(
    G: SemidirectProduct,
    q: int,
    S: GeneratingSet,
    eps: Any,
    radii: Sequence[int] = BOX_RADII,
    weights: Sequence[Any] = BOX_WEIGHTS,
    slab_fallback: bool = True,
    max_slab_R: int = 64,
) -> CoverMap:
    """Doubling search over box covers (R, W), then slab covers if no box passes.

    Box covers have trivial vertex isotropy. A frame m with |m| < R sees the
    lattice step 1/q stretched by A^-m, so boxes pass only once q outgrows
    the expansion of A across the frames needed for eps. Slab vertices are
    fixed by (qZ)^n, so a slab result carries ``in_cyc: False`` and
    ``fallback: True`` in its report.

    Raises:
        SearchBudgetExceeded: If no box passes and ``slab_fallback`` is off,
            or no slab passes either.
    """
    attempts: List[Dict[str, Any]] = []
    for R in radii:
        for W in weights:
            try:
                F = build_prop_Zn(G, q, S, eps, "box", R, W)
            except ContractionFailed as e:
                attempts.append({"kind": "box", "R": R, "W": str(W), "worst_pair": e.details.get("pair")})
                continue
            F.report.update({"attempts": attempts, "fallback": False})
            return F
    if not slab_fallback:
        raise SearchBudgetExceeded(f"No box cover passed for q={q}, eps={eps}", {"attempts": attempts})
    logger.warning(f"No box cover passed for q={q}, eps={eps}; trying slab covers")
    R = 1
    while R <= max_slab_R:
        try:
            F = build_prop_Zn(G, q, S, eps, "slab", R)
            F.report.update({"attempts": attempts, "fallback": True})
            return F
        except ContractionFailed as e:
            attempts.append({"kind": "slab", "R": R, "worst_pair": e.details.get("pair")})
        R *= 2
    raise SearchBudgetExceeded(f"No cover passed for q={q}, eps={eps}", {"attempts": attempts})


@dataclass
class CosetMap:
    """f(g pi^-1(H)) = (g w, F((g w)^-1)) in G x_Hbar E, where w^-1 pi^-1(H) w lies in Hbar."""

    G: SemidirectProduct
    built: Any
    induced: InducedComplex
    conjugator: GroupElement
    report: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, g: GroupElement) -> SPoint:
        x = self.G.mul(g, self.conjugator)
        return self.induced.point(x, self.built(self.G.inv(x)))


def assemble_coset_map(
    G: SemidirectProduct,
    preimage: Subgroup,
    built: Any,
    S: GeneratingSet,
    eps: Any,
    conjugator: Optional[Vector] = None,
    radius: int = 2,
    samples: int = 50,
    seed: int = 0,
) -> CosetMap:
    """Induce ``built`` to G and check descent to G / preimage and eps-equivariance.

    ``conjugator`` is the lattice vector w with w^-1 preimage w inside the
    subgroup of ``built``; it is zero when the preimage already lies there.

    Raises:
        DescentFailed: If f(g h) differs from f(g) for some h in the preimage.
        EquivarianceFailed: If d1(f(s x), s f(x)) > eps for a sampled x.
    """
    eps = Fraction(eps)
    c = GroupElement(tuple(conjugator) if conjugator is not None else (0,) * G.n, 0)
    induced = induce(G, built.subgroup, built.fiber, built.fiber_action)
    f = CosetMap(G, built, induced, c)
    ball = G.word_ball(S, radius)
    rng = np.random.default_rng(seed)

    h_gens = G.generators(preimage) or [G.identity()]
    descent_checked = 0
    for _ in range(samples):
        g = ball[int(rng.integers(0, len(ball)))]
        h = G.identity()
        for _ in range(int(rng.integers(1, 4))):
            step = h_gens[int(rng.integers(0, len(h_gens)))]
            h = G.mul(h, step if rng.random() < 0.5 else G.inv(step))
        if f(G.mul(g, h)) != f(g):
            raise DescentFailed(f"Coset map differs on g={g} and g h with h={h}")
        descent_checked += 1

    worst = Fraction(0)
    for x in ball:
        fx = f(x)
        for s in letters(G, S):
            d = l1_distance(f(G.mul(s, x)), induced.act(s, fx))
            worst = max(worst, Fraction(d))
            if d > eps:
                raise EquivarianceFailed(
                    f"d1(f(s x), s f(x)) = {d} exceeds eps = {eps} at x={x}, s={s}",
                    {"x": x.to_dict(), "s": s.to_dict(), "d1": str(d)},
                )
    f.report = {
        "descent_checked": descent_checked,
        "equivariance_checked": len(ball) * len(letters(G, S)),
        "ball_radius": radius,
        "worst_equivariance": str(worst),
        "conjugator": [str(a) for a in c.v],
    }
    return f
