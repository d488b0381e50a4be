"""Exact arithmetic for Z^n semidirect Z, its finite quotients and integer lattices."""

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product
from math import gcd
from typing import Any, Iterable, List, Optional, Protocol, Sequence, Tuple, TypeVar

from sympy import Matrix, factorint, isprime, totient

from fj_workbench.errors import (
    CapExceeded,
    DimensionMismatch,
    InvalidDescriptor,
    NotInvertibleMod,
    PreconditionFailed,
    SearchBudgetExceeded,
)

logger = logging.getLogger("fjwb.group_core")

Vector = Tuple[int, ...]
Rows = Tuple[Tuple[int, ...], ...]

E = TypeVar("E")

DETERMINISTIC_PRIME_LIMIT = 2**64


class Group(Protocol[E]):
    """Minimal group interface used by the controlled and transfer modules."""

    def identity(self) -> E: ...

    def mul(self, g: E, h: E) -> E: ...

    def inv(self, g: E) -> E: ...


class TrivialGroup:
    """The group with one element, written ``0``."""

    name = "trivial"

    def identity(self) -> int:
        return 0

    def mul(self, g: int, h: int) -> int:
        return 0

    def inv(self, g: int) -> int:
        return 0


class IntegerGroup:
    """The infinite cyclic group Z written additively."""

    name = "Z"

    def identity(self) -> int:
        return 0

    def mul(self, g: int, h: int) -> int:
        return g + h

    def inv(self, g: int) -> int:
        return -g


def _matmul(a: Rows, b: Rows) -> Rows:
    cols = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a)


def _identity_rows(n: int) -> Rows:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


@dataclass(frozen=True)
class IntMatrix:
    """Square integer matrix with arbitrary-precision entries."""

    rows: Rows

    def __post_init__(self) -> None:
        n = len(self.rows)
        if n == 0 or any(len(row) != n for row in self.rows):
            raise DimensionMismatch(f"Matrix must be square and nonempty, got {self.rows}")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[Any]]) -> "IntMatrix":
        return cls(tuple(tuple(int(x) for x in row) for row in rows))

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(_identity_rows(n))

    @property
    def n(self) -> int:
        return len(self.rows)

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if other.n != self.n:
            raise DimensionMismatch(f"Cannot multiply {self.n}x{self.n} by {other.n}x{other.n}")
        return IntMatrix(_matmul(self.rows, other.rows))

    def apply(self, v: Sequence[int]) -> Vector:
        if len(v) != self.n:
            raise DimensionMismatch(f"Vector of length {len(v)} for matrix of size {self.n}")
        return tuple(sum(a * b for a, b in zip(row, v)) for row in self.rows)

    def to_sympy(self) -> Matrix:
        return Matrix(self.rows)

    def det(self) -> int:
        return int(self.to_sympy().det(method="bareiss"))

    def is_unimodular(self) -> bool:
        return abs(self.det()) == 1

    def inverse(self) -> "IntMatrix":
        """Integer inverse of a unimodular matrix."""
        d = self.det()
        if abs(d) != 1:
            raise PreconditionFailed(f"Matrix with determinant {d} has no integer inverse")
        adj = self.to_sympy().adjugate()
        return IntMatrix.from_rows((d * adj).tolist())

    def power(self, k: int) -> "IntMatrix":
        return IntMatrix(_matrix_power(self.rows, k))

    def mod(self, s: int) -> "IntMatrix":
        return IntMatrix(tuple(tuple(x % s for x in row) for row in self.rows))

    def to_dict(self) -> dict:
        return {"n": self.n, "rows": [[str(x) for x in row] for row in self.rows]}


@lru_cache(maxsize=4096)
def _matrix_power(rows: Rows, k: int) -> Rows:
    n = len(rows)
    if k < 0:
        return _matrix_power(IntMatrix(rows).inverse().rows, -k)
    result = _identity_rows(n)
    base = rows
    while k:
        if k & 1:
            result = _matmul(result, base)
        base = _matmul(base, base)
        k >>= 1
    return result


@lru_cache(maxsize=4096)
def _matrix_power_mod(rows: Rows, k: int, s: int) -> Rows:
    n = len(rows)
    result = _identity_rows(n)
    base = tuple(tuple(x % s for x in row) for row in rows)
    while k:
        if k & 1:
            result = tuple(tuple(x % s for x in row) for row in _matmul(result, base))
        base = tuple(tuple(x % s for x in row) for row in _matmul(base, base))
        k >>= 1
    return tuple(tuple(x % s for x in row) for row in result)


def matrix_order_mod(A: IntMatrix, s: int) -> int:
    """Least m >= 1 with A^m = I modulo s.

    Raises:
        NotInvertibleMod: If det A is not a unit modulo s.
    """
    if s < 2:
        raise PreconditionFailed(f"Modulus must be at least 2, got {s}")
    if gcd(A.det(), s) != 1:
        raise NotInvertibleMod(f"det A = {A.det()} is not invertible modulo {s}")
    identity = _identity_rows(A.n)
    base = A.mod(s).rows
    current = base
    bound = s ** (A.n * A.n)
    m = 1
    while current != identity:
        current = tuple(tuple(x % s for x in row) for row in _matmul(current, base))
        m += 1
        if m > bound:
            raise NotInvertibleMod(f"No finite order modulo {s}")
    return m


def index_ik(A: IntMatrix, k: int) -> int:
    """|det(I - A^k)|, zero when the index of (I - A^k)Z^n is infinite."""
    Ak = A.power(k)
    diff = [[int(i == j) - Ak.rows[i][j] for j in range(A.n)] for i in range(A.n)]
    return abs(int(Matrix(diff).det(method="bareiss")))


def root_of_unity_orders(A: IntMatrix) -> List[int]:
    """All m with phi(m) <= n for which det(A^m - I) vanishes."""
    n = A.n
    candidates = [m for m in range(1, 2 * n * n + 3) if int(totient(m)) <= n]
    hits = []
    for m in candidates:
        Am = A.power(m)
        diff = [[Am.rows[i][j] - int(i == j) for j in range(n)] for i in range(n)]
        if Matrix(diff).det(method="bareiss") == 0:
            hits.append(m)
    return hits


def has_root_of_unity_eigenvalue(A: IntMatrix) -> bool:
    return bool(root_of_unity_orders(A))


def _lucas_witness(n: int, factors: Iterable[int]) -> Optional[int]:
    for a in range(2, 1000):
        if pow(a, n - 1, n) != 1:
            return None
        if all(pow(a, (n - 1) // q, n) != 1 for q in factors):
            return a
    return None


def is_prime_certified(n: int) -> bool:
    """Deterministic primality decision.

    Below 2^64 the strong-pseudoprime bases are exhaustive; above that a
    Baillie-PSW pass is followed by a recursive Lucas certificate on n - 1.
    """
    if n < DETERMINISTIC_PRIME_LIMIT:
        return bool(isprime(n))
    if not isprime(n):
        return False
    factors = list(factorint(n - 1))
    if not all(is_prime_certified(q) for q in factors):
        return False
    return _lucas_witness(n, factors) is not None


def dirichlet_primes(K: int, lower: int, count: int, cap: int = 1_000_000) -> List[int]:
    """The ``count`` smallest primes p = 1 mod K with p >= lower.

    Raises:
        SearchBudgetExceeded: If ``cap`` candidates are examined without success.
    """
    if K < 1 or count < 1:
        raise PreconditionFailed(f"Need K >= 1 and count >= 1, got K={K}, count={count}")
    start = max(lower, 2)
    candidate = start + ((1 - start) % K)
    primes: List[int] = []
    examined = 0
    while len(primes) < count:
        if examined >= cap:
            raise SearchBudgetExceeded(
                f"Examined {cap} candidates = 1 mod {K}, found {primes}",
                {"K": K, "lower": lower, "found": primes},
            )
        if is_prime_certified(candidate):
            primes.append(candidate)
        candidate += K
        examined += 1
    logger.debug(f"Primes = 1 mod {K} above {lower}: {primes} after {examined} candidates")
    return primes


# Lattices: generators are rows, the basis is in row echelon Hermite form with
# positive pivots and entries above each pivot reduced into [0, pivot).  Read
# column-wise this is the lower-triangular convention.


def hermite_normal_form(vectors: Iterable[Sequence[int]], n: int) -> Tuple[Vector, ...]:
    rows = [list(v) for v in vectors if any(v)]
    for row in rows:
        if len(row) != n:
            raise DimensionMismatch(f"Lattice generator {row} is not of length {n}")
    r = 0
    for col in range(n):
        while True:
            nonzero = [i for i in range(r, len(rows)) if rows[i][col] != 0]
            if not nonzero:
                break
            pivot = min(nonzero, key=lambda i: abs(rows[i][col]))
            rows[r], rows[pivot] = rows[pivot], rows[r]
            done = True
            for i in range(r + 1, len(rows)):
                if rows[i][col]:
                    q = rows[i][col] // rows[r][col]
                    rows[i] = [a - q * b for a, b in zip(rows[i], rows[r])]
                    if rows[i][col]:
                        done = False
            if done:
                break
        if r < len(rows) and rows[r][col] != 0:
            if rows[r][col] < 0:
                rows[r] = [-a for a in rows[r]]
            for i in range(r):
                q = rows[i][col] // rows[r][col]
                if q:
                    rows[i] = [a - q * b for a, b in zip(rows[i], rows[r])]
            r += 1
    return tuple(tuple(row) for row in rows[:r])


def _pivot(row: Sequence[int]) -> int:
    return next(i for i, x in enumerate(row) if x)


def lattice_reduce(v: Sequence[int], basis: Sequence[Vector]) -> Vector:
    """Canonical representative of v modulo the lattice spanned by an HNF basis."""
    out = list(v)
    for row in basis:
        p = _pivot(row)
        q = out[p] // row[p]
        if q:
            out = [a - q * b for a, b in zip(out, row)]
    return tuple(out)


def lattice_contains(basis: Sequence[Vector], v: Sequence[int]) -> bool:
    return not any(lattice_reduce(v, basis))


def lattice_index(basis: Sequence[Vector], n: int) -> int:
    """Index of a lattice in Z^n, zero when the rank is deficient."""
    if len(basis) < n:
        return 0
    index = 1
    for row in basis:
        index *= row[_pivot(row)]
    return index


@dataclass(frozen=True, order=True)
class GroupElement:
    """Element v t^k of Z^n semidirect Z."""

    v: Vector
    k: int

    @classmethod
    def make(cls, v: Iterable[int], k: int) -> "GroupElement":
        return cls(tuple(int(x) for x in v), int(k))

    def to_dict(self) -> dict:
        return {"v": [str(x) for x in self.v], "k": str(self.k)}


@dataclass(frozen=True)
class GeneratingSet:
    """Word alphabet for balls and equivariance checks."""

    elements: Tuple[GroupElement, ...]

    def __post_init__(self) -> None:
        if not self.elements:
            raise PreconditionFailed("A generating set needs at least one element")

    def max_k(self) -> int:
        return max(abs(g.k) for g in self.elements)


@dataclass(frozen=True)
class Subgroup:
    """Subgroup of Z^n semidirect Z in lattice normal form.

    ``lattice`` is the HNF basis of the intersection with Z^n; ``slope`` is a
    generator (u, d) of the subgroup modulo the lattice, u reduced.
    """

    n: int
    lattice: Tuple[Vector, ...]
    slope: Optional[Tuple[Vector, int]] = None

    def to_dict(self) -> dict:
        return {
            "lattice": [[str(x) for x in row] for row in self.lattice],
            "slope": None
            if self.slope is None
            else {"u": [str(x) for x in self.slope[0]], "d": str(self.slope[1])},
        }


class SemidirectProduct:
    """The group Z^n semidirect Z twisted by a unimodular matrix A."""

    def __init__(self, A: IntMatrix):
        if not A.is_unimodular():
            raise PreconditionFailed(f"Twisting matrix must have det +-1, got {A.det()}")
        self.A = A
        self.n = A.n
        self.name = "semidirect"

    def identity(self) -> GroupElement:
        return GroupElement((0,) * self.n, 0)

    def element(self, v: Iterable[int], k: int) -> GroupElement:
        g = GroupElement.make(v, k)
        self._check(g)
        return g

    def _check(self, *elements: GroupElement) -> None:
        for g in elements:
            if len(g.v) != self.n:
                raise DimensionMismatch(
                    f"Element {g} has lattice part of length {len(g.v)}, expected {self.n}"
                )

    def mul(self, g: GroupElement, h: GroupElement) -> GroupElement:
        self._check(g, h)
        w = self.A.power(g.k).apply(h.v)
        return GroupElement(tuple(a + b for a, b in zip(g.v, w)), g.k + h.k)

    def inv(self, g: GroupElement) -> GroupElement:
        self._check(g)
        w = self.A.power(-g.k).apply(g.v)
        return GroupElement(tuple(-x for x in w), -g.k)

    def power(self, g: GroupElement, m: int) -> GroupElement:
        if m < 0:
            g, m = self.inv(g), -m
        result = self.identity()
        base = g
        while m:
            if m & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            m >>= 1
        return result

    def conjugate(self, c: GroupElement, g: GroupElement) -> GroupElement:
        """c g c^-1."""
        return self.mul(self.mul(c, g), self.inv(c))

    def project(self, g: GroupElement, F: "FiniteQuotientDesc") -> GroupElement:
        self._check(g)
        return F.reduce(g)

    def word_ball(self, S: GeneratingSet, radius: int, cap: int = 200_000) -> List[GroupElement]:
        """All products of at most ``radius`` letters of S and S^-1."""
        letters = sorted(set(S.elements) | {self.inv(s) for s in S.elements})
        seen = {self.identity()}
        frontier = [self.identity()]
        for _ in range(radius):
            nxt = []
            for g in frontier:
                for s in letters:
                    h = self.mul(g, s)
                    if h not in seen:
                        seen.add(h)
                        nxt.append(h)
                        if len(seen) > cap:
                            raise CapExceeded(f"Word ball exceeded {cap} elements")
            frontier = nxt
        return sorted(seen)

    def normal_form(self, gens: Iterable[GroupElement]) -> Subgroup:
        """Lattice normal form of the subgroup generated by ``gens``."""
        gens = list(gens)
        self._check(*gens)
        cyclic = [g for g in gens if g.k != 0]
        lattice_vecs: List[Vector] = [g.v for g in gens if g.k == 0]
        while len(cyclic) > 1:
            cyclic.sort(key=lambda g: (abs(g.k), g))
            a, b = cyclic[0], cyclic[1]
            q = b.k // a.k
            reduced = self.mul(b, self.power(a, -q))
            cyclic.pop(1)
            if reduced.k == 0:
                lattice_vecs.append(reduced.v)
            else:
                cyclic.append(reduced)
        basis = hermite_normal_form(lattice_vecs, self.n)
        if not cyclic:
            return Subgroup(self.n, basis, None)
        g0 = cyclic[0]
        if g0.k < 0:
            g0 = self.inv(g0)
        d = g0.k
        basis = self.close_lattice(basis, d)
        return Subgroup(self.n, basis, (lattice_reduce(g0.v, basis), d))

    def close_lattice(self, basis: Tuple[Vector, ...], d: int) -> Tuple[Vector, ...]:
        """Smallest lattice containing ``basis`` and invariant under A^d and A^-d."""
        fwd, back = self.A.power(d), self.A.power(-d)
        while True:
            grown = hermite_normal_form(
                list(basis) + [fwd.apply(w) for w in basis] + [back.apply(w) for w in basis],
                self.n,
            )
            if grown == basis:
                return basis
            basis = grown

    def generators(self, H: Subgroup) -> List[GroupElement]:
        gens = [GroupElement(row, 0) for row in H.lattice]
        if H.slope is not None:
            gens.append(GroupElement(H.slope[0], H.slope[1]))
        return gens

    def contains(self, H: Subgroup, g: GroupElement) -> bool:
        self._check(g)
        if g.k == 0:
            return lattice_contains(H.lattice, g.v)
        if H.slope is None or g.k % H.slope[1]:
            return False
        g0 = GroupElement(H.slope[0], H.slope[1])
        rest = self.mul(g, self.power(g0, -(g.k // H.slope[1])))
        return lattice_contains(H.lattice, rest.v)

    def decompose(self, H: Subgroup, g: GroupElement) -> Tuple[GroupElement, GroupElement]:
        """Write g = rep * h with h in H and rep a canonical left-coset representative."""
        if H.slope is not None:
            d = H.slope[1]
            r0 = g.k % d
            h1 = self.power(GroupElement(H.slope[0], d), (g.k - r0) // d)
        else:
            r0 = g.k
            h1 = self.identity()
        y = self.mul(g, self.inv(h1))
        shifted = hermite_normal_form([self.A.power(r0).apply(w) for w in H.lattice], self.n)
        y_rep = lattice_reduce(y.v, shifted)
        z = self.A.power(-r0).apply(tuple(a - b for a, b in zip(y.v, y_rep)))
        rep = GroupElement(y_rep, r0)
        h = self.mul(GroupElement(z, 0), h1)
        return rep, h


@dataclass(frozen=True)
class FiniteQuotientDesc:
    """The finite quotient (Z/s)^n semidirect Z/r of Z^n semidirect Z."""

    n: int
    s: int
    r: int
    A_mod_s: IntMatrix
    A_order: int = field(default=0, compare=False)

    @classmethod
    def for_matrix(cls, A: IntMatrix, s: int, r: Optional[int] = None) -> "FiniteQuotientDesc":
        order = matrix_order_mod(A, s)
        r = s * order if r is None else r
        if r < 1 or r % order:
            raise InvalidDescriptor(f"Order {order} of A mod {s} does not divide r = {r}")
        return cls(A.n, s, r, A.mod(s), order)

    def __post_init__(self) -> None:
        if self.A_order == 0:
            object.__setattr__(self, "A_order", matrix_order_mod(self.A_mod_s, self.s))
        if self.r % self.A_order:
            raise InvalidDescriptor(
                f"Order {self.A_order} of A mod {self.s} does not divide r = {self.r}"
            )

    @cached_property
    def _powers(self) -> Tuple[Rows, ...]:
        return tuple(
            _matrix_power_mod(self.A_mod_s.rows, j, self.s) for j in range(self.A_order)
        )

    @property
    def order(self) -> int:
        return self.s**self.n * self.r

    def act(self, k: int, v: Sequence[int]) -> Vector:
        """A^k v modulo s."""
        rows = self._powers[k % self.A_order]
        return tuple(sum(a * b for a, b in zip(row, v)) % self.s for row in rows)

    def identity(self) -> GroupElement:
        return GroupElement((0,) * self.n, 0)

    def reduce(self, g: GroupElement) -> GroupElement:
        return GroupElement(tuple(x % self.s for x in g.v), g.k % self.r)

    def mul(self, g: GroupElement, h: GroupElement) -> GroupElement:
        w = self.act(g.k, h.v)
        return GroupElement(
            tuple((a + b) % self.s for a, b in zip(g.v, w)), (g.k + h.k) % self.r
        )

    def inv(self, g: GroupElement) -> GroupElement:
        w = self.act(-g.k, g.v)
        return GroupElement(tuple(-x % self.s for x in w), -g.k % self.r)

    def power(self, g: GroupElement, m: int) -> GroupElement:
        if m < 0:
            g, m = self.inv(g), -m
        result = self.identity()
        base = g
        while m:
            if m & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            m >>= 1
        return result

    def vector_order(self, v: Sequence[int]) -> int:
        return self.s // gcd(self.s, *v)

    def element_order(self, g: GroupElement) -> int:
        m = self.r // gcd(g.k, self.r)
        return m * self.vector_order(self.power(g, m).v)

    def elements(self) -> Iterable[GroupElement]:
        for v in product(range(self.s), repeat=self.n):
            for k in range(self.r):
                yield GroupElement(tuple(v), k)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "s": str(self.s),
            "r": str(self.r),
            "A_mod_s": self.A_mod_s.to_dict(),
            "order_of_A_mod_s": str(self.A_order),
        }
