"""Geometric modules over free G-spaces G x X0 and controlled morphisms between them.

A morphism is stored per orbit: the block keyed by (delta, x_to, x_from)
is the matrix of the component sending (h, x_from) to (h * delta, x_to).
Equivariance under the left action g (h, x) = (g h, x) holds by storage.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, FrozenSet, Hashable, Iterable, Mapping, Optional, Tuple

from sympy import Rational
from sympy.polys.domains import GF, QQ, ZZ
from sympy.polys.domains.domain import Domain
from sympy.polys.matrices import DomainMatrix

from fj_workbench.base.group_core import Group
from fj_workbench.errors import DimensionMismatch, NotInverse, PreconditionFailed

logger = logging.getLogger("fjwb.controlled")

Label = Hashable
BlockKey = Tuple[Any, Label, Label]


def ring_domain(name: str) -> Domain:
    """Coefficient domain from its name: ``ZZ``, ``QQ`` or ``GF(m)``."""
    name = name.strip()
    if name == "ZZ":
        return ZZ
    if name == "QQ":
        return QQ
    if name.startswith("GF(") and name.endswith(")"):
        return GF(int(name[3:-1]))
    raise PreconditionFailed(f"Unknown coefficient ring {name!r}")


def to_domain(domain: Domain, x: Any) -> Any:
    if isinstance(x, Fraction):
        return domain.from_sympy(Rational(x.numerator, x.denominator))
    if isinstance(x, str) and "/" in x:
        return to_domain(domain, Fraction(x))
    return domain(int(x))


def to_fraction(domain: Domain, x: Any) -> Fraction:
    value = domain.to_sympy(x)
    return Fraction(int(value.p), int(value.q))


def matrix(rows: Iterable[Iterable[Any]], domain: Domain, shape: Optional[Tuple[int, int]] = None) -> DomainMatrix:
    rows = [[to_domain(domain, x) for x in row] for row in rows]
    if not rows:
        return zeros(shape or (0, 0), domain)
    return DomainMatrix(rows, (len(rows), len(rows[0])), domain)


def zeros(shape: Tuple[int, int], domain: Domain) -> DomainMatrix:
    return DomainMatrix.zeros(shape, domain).to_dense()


def eye(n: int, domain: Domain) -> DomainMatrix:
    return DomainMatrix.eye(n, domain).to_dense()


def max_norm(domain: Domain, M: DomainMatrix) -> Fraction:
    return max((abs(to_fraction(domain, x)) for row in M.to_list() for x in row), default=Fraction(0))


@dataclass
class GeometricModule:
    """Free module over G x X0 with rank ``ranks[x]`` at every point (h, x)."""

    group: Group
    ranks: Dict[Label, int]
    domain: Domain = ZZ

    def rank(self, x: Label) -> int:
        if x not in self.ranks:
            raise DimensionMismatch(f"Point {x!r} is not in the module")
        return self.ranks[x]

    @property
    def labels(self) -> Tuple[Label, ...]:
        return tuple(self.ranks)

    def restrict(self, keep: Callable[[Label], bool]) -> "GeometricModule":
        return GeometricModule(self.group, {x: r for x, r in self.ranks.items() if keep(x)}, self.domain)

    def same_as(self, other: "GeometricModule") -> bool:
        return self.ranks == other.ranks and self.domain == other.domain


@dataclass
class ControlledMorphism:
    """Equivariant morphism between geometric modules, one matrix per orbit pair."""

    source: GeometricModule
    target: GeometricModule
    blocks: Dict[BlockKey, DomainMatrix] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for (delta, x_to, x_from), block in self.blocks.items():
            shape = (self.target.rank(x_to), self.source.rank(x_from))
            if block.shape != shape:
                raise DimensionMismatch(
                    f"Block {(delta, x_to, x_from)!r} has shape {block.shape}, expected {shape}"
                )
            if not block.is_zero_matrix:
                clean[(delta, x_to, x_from)] = block
        self.blocks = clean

    @property
    def group(self) -> Group:
        return self.source.group

    @property
    def domain(self) -> Domain:
        return self.source.domain

    @classmethod
    def identity(cls, module: GeometricModule) -> "ControlledMorphism":
        e = module.group.identity()
        return cls(module, module, {(e, x, x): eye(r, module.domain) for x, r in module.ranks.items()})

    @classmethod
    def zero(cls, source: GeometricModule, target: GeometricModule) -> "ControlledMorphism":
        return cls(source, target, {})

    def add_block(self, key: BlockKey, block: DomainMatrix) -> None:
        total = self.blocks[key] + block if key in self.blocks else block
        if total.is_zero_matrix:
            self.blocks.pop(key, None)
        else:
            self.blocks[key] = total

    def __add__(self, other: "ControlledMorphism") -> "ControlledMorphism":
        out = ControlledMorphism(self.source, self.target, dict(self.blocks))
        for key, block in other.blocks.items():
            out.add_block(key, block)
        return out

    def __neg__(self) -> "ControlledMorphism":
        return ControlledMorphism(self.source, self.target, {k: -b for k, b in self.blocks.items()})

    def __sub__(self, other: "ControlledMorphism") -> "ControlledMorphism":
        return self + (-other)

    def scale(self, c: Any) -> "ControlledMorphism":
        c = to_domain(self.domain, c)
        return ControlledMorphism(self.source, self.target, {k: b * c for k, b in self.blocks.items()})

    @property
    def is_zero(self) -> bool:
        return not self.blocks

    def equals(self, other: "ControlledMorphism") -> bool:
        return (self - other).is_zero

    def restrict(
        self, keep_from: Callable[[Label], bool], keep_to: Callable[[Label], bool]
    ) -> "ControlledMorphism":
        source = self.source.restrict(keep_from)
        target = self.target.restrict(keep_to)
        blocks = {
            (d, t, f): b for (d, t, f), b in self.blocks.items() if keep_from(f) and keep_to(t)
        }
        return ControlledMorphism(source, target, blocks)

    def relabel(self, mapping: Callable[[Label], Label]) -> "ControlledMorphism":
        source = GeometricModule(self.group, {mapping(x): r for x, r in self.source.ranks.items()}, self.domain)
        target = GeometricModule(self.group, {mapping(x): r for x, r in self.target.ranks.items()}, self.domain)
        blocks = {(d, mapping(t), mapping(f)): b for (d, t, f), b in self.blocks.items()}
        return ControlledMorphism(source, target, blocks)

    def max_entry(self) -> Fraction:
        return max((max_norm(self.domain, b) for b in self.blocks.values()), default=Fraction(0))

    def to_records(self) -> list:
        """JSON-lines style records, one per nonzero block."""
        records = []
        for (delta, x_to, x_from), block in self.blocks.items():
            records.append(
                {
                    "from": {"h": _jsonable(self.group.identity()), "x": _jsonable(x_from)},
                    "to": {"h": _jsonable(delta), "x": _jsonable(x_to)},
                    "block": [[str(self.domain.to_sympy(x)) for x in row] for row in block.to_list()],
                }
            )
        return records


def _jsonable(x: Any) -> Any:
    if hasattr(x, "to_dict"):
        return x.to_dict()
    if isinstance(x, (tuple, list)):
        return [_jsonable(y) for y in x]
    if isinstance(x, (int, Fraction)):
        return str(x)
    return x


def support(f: ControlledMorphism) -> FrozenSet[BlockKey]:
    """Orbit pairs ((delta, x_to), (e, x_from)) carrying a nonzero block."""
    return frozenset(f.blocks)


def compose(f: ControlledMorphism, g: ControlledMorphism) -> ControlledMorphism:
    """f after g."""
    if not g.target.same_as(f.source):
        raise DimensionMismatch("Codomain of the inner morphism differs from the domain of the outer one")
    G = f.group
    out = ControlledMorphism(g.source, f.target, {})
    by_source: Dict[Label, list] = {}
    for (delta_f, x2, x1), block in f.blocks.items():
        by_source.setdefault(x1, []).append((delta_f, x2, block))
    for (delta_g, x1, x0), block_g in g.blocks.items():
        for delta_f, x2, block_f in by_source.get(x1, []):
            out.add_block((G.mul(delta_g, delta_f), x2, x0), block_f * block_g)
    return out


@dataclass
class ControlMap:
    """G-map p from G x X0 to a metric space, with that space's distance."""

    evaluate: Callable[[Any, Label], Any]
    distance: Callable[[Any, Any], Any]
    name: str = "control"

    def __call__(self, h: Any, x: Label) -> Any:
        return self.evaluate(h, x)


def control_of(f: ControlledMorphism, p: ControlMap) -> Any:
    """Largest distance between the images of a support pair; zero for the zero morphism."""
    e = f.group.identity()
    return max(
        (p.distance(p(delta, x_to), p(e, x_from)) for delta, x_to, x_from in f.blocks),
        default=0,
    )


@dataclass
class AutomorphismReport:
    passed: bool
    control: Any
    inverse_control: Any
    eps: Any

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "control": str(self.control),
            "inverse_control": str(self.inverse_control),
            "eps": str(self.eps),
        }


def is_eps_automorphism(
    f: ControlledMorphism, f_inv: ControlledMorphism, p: ControlMap, eps: Any
) -> AutomorphismReport:
    """Check that f and f_inv are mutually inverse and both eps-controlled.

    Raises:
        NotInverse: If either composite differs from the identity.
    """
    if not compose(f, f_inv).equals(ControlledMorphism.identity(f.target)):
        raise NotInverse("f o f_inv is not the identity")
    if not compose(f_inv, f).equals(ControlledMorphism.identity(f.source)):
        raise NotInverse("f_inv o f is not the identity")
    c, c_inv = control_of(f, p), control_of(f_inv, p)
    report = AutomorphismReport(c <= eps and c_inv <= eps, c, c_inv, eps)
    logger.debug(f"eps-automorphism check: {report.to_dict()}")
    return report


def translation_control(position: Mapping[Label, Any]) -> ControlMap:
    """Control map (h, x) -> h + position[x] for G = Z acting on the real line."""
    return ControlMap(lambda h, x: h + position[x], lambda a, b: abs(a - b), "line")


def shift_morphism(module: GeometricModule, step: int, x: Label) -> ControlledMorphism:
    """Map (h, x) -> (h + step, x) on a module over G = Z."""
    return ControlledMorphism(module, module, {(step, x, x): eye(module.rank(x), module.domain)})
