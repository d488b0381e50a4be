"""Geodesic flow space of R^n with translation actions.

Generalized geodesics are unit speed on (c_minus, c_plus) and constant
outside.  Distances are computed by adaptive Simpson quadrature on a finite
window whose tails are bounded using the 1-Lipschitz growth of geodesics.
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from fj_workbench.errors import PreconditionFailed, SearchBudgetExceeded, Undecided

logger = logging.getLogger("fjwb.flowspace")

Point = Tuple[float, ...]
INF = math.inf
UNIT_TOLERANCE = 1e-9


def _add(x: Sequence[float], y: Sequence[float]) -> Point:
    return tuple(a + b for a, b in zip(x, y))


def _sub(x: Sequence[float], y: Sequence[float]) -> Point:
    return tuple(a - b for a, b in zip(x, y))


def _scale(c: float, x: Sequence[float]) -> Point:
    return tuple(c * a for a in x)


def _norm(x: Sequence[float]) -> float:
    return math.hypot(*x) if x else 0.0


def distance(x: Sequence[float], y: Sequence[float]) -> float:
    return _norm(_sub(x, y))


def _clamp(t: float, lo: float, hi: float) -> float:
    return lo if t < lo else hi if t > hi else t


@dataclass(frozen=True)
class GeneralizedGeodesic:
    """c(t) = anchor + (clamp(t) - clamp(0)) * direction, clamped to [c_minus, c_plus]."""

    anchor: Point
    direction: Point
    c_minus: float = -INF
    c_plus: float = INF
    end_point: Optional[Point] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.c_minus > self.c_plus:
            raise PreconditionFailed(f"c_minus {self.c_minus} exceeds c_plus {self.c_plus}")
        if len(self.anchor) != len(self.direction):
            raise PreconditionFailed("Anchor and direction have different dimensions")
        length = _norm(self.direction)
        if length == 0 or self.c_minus == self.c_plus:
            object.__setattr__(self, "direction", (0.0,) * len(self.anchor))
            object.__setattr__(self, "c_minus", 0.0)
            object.__setattr__(self, "c_plus", 0.0)
            object.__setattr__(self, "end_point", None)
        elif abs(length - 1) > UNIT_TOLERANCE:
            raise PreconditionFailed(f"Direction must be a unit vector, has length {length}")

    @classmethod
    def constant(cls, x: Sequence[float]) -> "GeneralizedGeodesic":
        return cls(tuple(x), (0.0,) * len(x), 0.0, 0.0)

    @classmethod
    def line(cls, anchor: Sequence[float], direction: Sequence[float]) -> "GeneralizedGeodesic":
        length = _norm(direction)
        return cls(tuple(anchor), _scale(1 / length, direction) if length else tuple(direction))

    @property
    def n(self) -> int:
        return len(self.anchor)

    @property
    def is_constant(self) -> bool:
        return self.c_minus == self.c_plus

    @property
    def is_complete_line(self) -> bool:
        return self.c_minus == -INF and self.c_plus == INF

    @property
    def bending_times(self) -> List[float]:
        return [t for t in (self.c_minus, self.c_plus) if math.isfinite(t)]

    def __call__(self, t: float) -> Point:
        if self.is_constant:
            return self.anchor
        ct = _clamp(t, self.c_minus, self.c_plus)
        if self.end_point is not None and ct == self.c_plus:
            return self.end_point
        offset = ct - _clamp(0.0, self.c_minus, self.c_plus)
        return _add(self.anchor, _scale(offset, self.direction))

    def translate(self, v: Sequence[float]) -> "GeneralizedGeodesic":
        end = None if self.end_point is None else _add(self.end_point, v)
        return GeneralizedGeodesic(_add(self.anchor, v), self.direction, self.c_minus, self.c_plus, end)

    def to_dict(self) -> dict:
        def time(t: float) -> Any:
            return "-inf" if t == -INF else "+inf" if t == INF else t

        return {
            "anchor": list(self.anchor),
            "dir": list(self.direction),
            "cminus": time(self.c_minus),
            "cplus": time(self.c_plus),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneralizedGeodesic":
        def time(x: Any) -> float:
            return float(x.replace("+", "")) if isinstance(x, str) else float(x)

        return cls(
            tuple(float(a) for a in data["anchor"]),
            tuple(float(a) for a in data["dir"]),
            time(data.get("cminus", "-inf")),
            time(data.get("cplus", "+inf")),
        )


@dataclass
class FlowSpaceParams:
    """Numerical settings for distances in FS(R^n)."""

    n: int
    tolerance: float = 1e-6
    max_depth: int = 40
    max_evaluations: int = 4000

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise PreconditionFailed(f"Quadrature tolerance must be positive, got {self.tolerance}")


def flow(c: GeneralizedGeodesic, tau: float) -> GeneralizedGeodesic:
    """phi_tau(c)(t) = c(t + tau)."""
    if tau == 0 or c.is_constant:
        return c
    return GeneralizedGeodesic(c(tau), c.direction, c.c_minus - tau, c.c_plus - tau, c.end_point)


def integrate_adaptive_simpson(
    f: Callable[[float], float], a: float, b: float, tol: float, max_depth: int
) -> Tuple[float, float]:
    """Adaptive Simpson rule with Richardson correction; returns (value, error estimate)."""
    if a == b:
        return 0.0, 0.0

    def simpson(fa: float, fm: float, fb: float, h: float) -> float:
        return h / 3.0 * (fa + 4.0 * fm + fb)

    def adaptive(
        a: float, b: float, fa: float, fm: float, fb: float, whole: float, depth: int, tol: float
    ) -> Tuple[float, float]:
        m = (a + b) / 2.0
        h = (b - a) / 4.0
        flm = f((a + m) / 2.0)
        frm = f((m + b) / 2.0)
        left = simpson(fa, flm, fm, h)
        right = simpson(fm, frm, fb, h)
        error = (left + right - whole) / 15.0
        if depth >= max_depth or abs(error) < tol:
            return left + right + error, abs(error)
        lv, le = adaptive(a, m, fa, flm, fm, left, depth + 1, tol / 2.0)
        rv, re = adaptive(m, b, fm, frm, fb, right, depth + 1, tol / 2.0)
        return lv + rv, le + re

    fa, fm, fb = f(a), f((a + b) / 2.0), f(b)
    return adaptive(a, b, fa, fm, fb, simpson(fa, fm, fb, (b - a) / 2.0), 0, tol)


def _tail_window(c: GeneralizedGeodesic, c2: GeneralizedGeodesic, tol: float) -> float:
    """Smallest doubling window T0 with each tail below tol / 4.

    Past T0 the integrand is at most (d(c(T0), c2(T0)) + 2(t - T0)) e^-t / 2,
    whose integral is e^-T0 (d + 2) / 2.
    """
    T0 = 1.0
    while True:
        worst = max(distance(c(T0), c2(T0)), distance(c(-T0), c2(-T0)))
        if math.exp(-T0) * (worst + 2.0) / 2.0 <= tol / 4.0:
            return T0
        T0 *= 1.5


def d_fs_enclosure(
    c: GeneralizedGeodesic, c2: GeneralizedGeodesic, params: FlowSpaceParams
) -> Tuple[float, float]:
    """Approximation of d_FS and a bound on its error."""
    if c.n != c2.n:
        raise PreconditionFailed(f"Geodesics live in R^{c.n} and R^{c2.n}")
    if c == c2:
        return 0.0, 0.0
    T0 = _tail_window(c, c2, params.tolerance)
    cuts = sorted({-T0, 0.0, T0, *(t for t in c.bending_times + c2.bending_times if -T0 < t < T0)})

    def integrand(t: float) -> float:
        return distance(c(t), c2(t)) * math.exp(-abs(t)) / 2.0

    pieces = len(cuts) - 1
    value, error = 0.0, params.tolerance / 2.0
    for a, b in zip(cuts, cuts[1:]):
        v, e = integrate_adaptive_simpson(integrand, a, b, params.tolerance / (2.0 * pieces), params.max_depth)
        value += v
        error += e
    return max(value, 0.0), error


def d_FS(c: GeneralizedGeodesic, c2: GeneralizedGeodesic, params: FlowSpaceParams) -> float:
    """Integral over R of d(c(t), c2(t)) / (2 e^|t|)."""
    return d_fs_enclosure(c, c2, params)[0]


@dataclass
class FoliatedDecision:
    holds: bool
    witness: Optional[float]
    minimum: float
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "witness": self.witness,
            "minimum": self.minimum,
            "evaluations": self.evaluations,
        }


def dfol_check(
    c: GeneralizedGeodesic,
    c2: GeneralizedGeodesic,
    alpha: float,
    eps: float,
    params: FlowSpaceParams,
    hint: Optional[float] = None,
) -> FoliatedDecision:
    """Decide whether some t in [-alpha, alpha] has d_FS(phi_t(c), c2) <= eps.

    t -> d_FS(phi_t(c), c2) is 1-Lipschitz, so an interval of width w whose
    midpoint value exceeds eps + w/2 + tol is discarded.  Intervals are
    refined best-first down to width tol.

    Raises:
        Undecided: If the minimum cannot be separated from eps within tolerance.
    """
    if alpha < 0:
        raise PreconditionFailed(f"alpha must be nonnegative, got {alpha}")
    tol = params.tolerance
    evaluations = 0
    best_t, best = 0.0, INF

    def value(t: float) -> float:
        nonlocal evaluations, best_t, best
        evaluations += 1
        v = d_FS(flow(c, t), c2, params)
        if v < best:
            best_t, best = t, v
        return v

    if hint is not None and value(_clamp(hint, -alpha, alpha)) + tol <= eps:
        return FoliatedDecision(True, best_t, best, evaluations)

    heap: List[Tuple[float, float, float]] = []

    def push(a: float, b: float) -> None:
        m = (a + b) / 2.0
        lower = value(m) - (b - a) / 2.0 - tol
        if lower <= eps:
            heapq.heappush(heap, (lower, a, b))

    push(-alpha, alpha)
    undecided = False
    while heap:
        if best + tol <= eps:
            return FoliatedDecision(True, best_t, best, evaluations)
        if evaluations >= params.max_evaluations:
            undecided = True
            break
        _, a, b = heapq.heappop(heap)
        if b - a <= tol:
            undecided = True
            continue
        m = (a + b) / 2.0
        push(a, m)
        push(m, b)
    if best + tol <= eps:
        return FoliatedDecision(True, best_t, best, evaluations)
    if undecided:
        raise Undecided(
            f"Foliated distance minimum {best} is within tolerance of eps = {eps}",
            {"minimum": best, "witness": best_t, "margin": best - eps},
        )
    return FoliatedDecision(False, None, best, evaluations)


def rho_R(x: Sequence[float], x0: Sequence[float], R: float) -> Point:
    """Closest point projection onto the closed ball B_R(x0)."""
    if R <= 0:
        raise PreconditionFailed(f"Radius must be positive, got {R}")
    d = distance(x, x0)
    if d <= R:
        return tuple(x)
    return _add(x0, _scale(R / d, _sub(x, x0)))


def iota_R(x: Sequence[float], x0: Sequence[float]) -> GeneralizedGeodesic:
    """Geodesic from x0 to x starting at time 0."""
    d = distance(x, x0)
    if d == 0:
        return GeneralizedGeodesic.constant(x0)
    return GeneralizedGeodesic(tuple(x0), _scale(1 / d, _sub(x, x0)), 0.0, d, tuple(x))


def _sample_ball(rng: np.random.Generator, x0: Sequence[float], R: float, count: int) -> List[Point]:
    n = len(x0)
    points = []
    for _ in range(count):
        g = rng.normal(size=n)
        r = R * rng.random() ** (1.0 / n)
        points.append(_add(x0, _scale(r / float(np.linalg.norm(g)), g.tolist())))
    return points


def _symmetric(S: Iterable[Sequence[float]]) -> List[Point]:
    out: List[Point] = []
    for s in S:
        for v in (tuple(s), _scale(-1, s)):
            if v not in out:
                out.append(v)
    return out


@dataclass
class HomotopyActionReport:
    R: float
    max_defect: float
    max_track_diameter: float
    samples: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ball_homotopy_action(
    S: Sequence[Sequence[float]],
    R: float,
    relators: Sequence[Sequence[Tuple[int, int]]] = (),
    x0: Optional[Sequence[float]] = None,
    samples: int = 200,
    seed: int = 0,
) -> HomotopyActionReport:
    """Measure the homotopy action phi_s(x) = rho_R(x + s) on B_R(x0).

    The defect is d(phi_s phi_s' x, phi_{s+s'} x) over pairs of letters;
    a relator (list of (generator index, exponent)) has track diameter
    d(phi_word(x), x), the length of the straight-line homotopy to the identity.
    """
    letters = _symmetric(S)
    x0 = tuple(x0) if x0 is not None else (0.0,) * len(letters[0])
    rng = np.random.default_rng(seed)
    defect = 0.0
    track = 0.0
    for x in _sample_ball(rng, x0, R, samples):
        for s in letters:
            for s2 in letters:
                two_step = rho_R(_add(rho_R(_add(x, s2), x0, R), s), x0, R)
                one_step = rho_R(_add(x, _add(s, s2)), x0, R)
                defect = max(defect, distance(two_step, one_step))
        for word in relators:
            y = x
            for index, exp in reversed(list(word)):
                step = S[index] if exp > 0 else _scale(-1, S[index])
                for _ in range(abs(exp)):
                    y = rho_R(_add(y, step), x0, R)
            track = max(track, distance(y, x))
    return HomotopyActionReport(R, defect, track, samples)


def f_TR(x: Sequence[float], x0: Sequence[float], T: float) -> GeneralizedGeodesic:
    return flow(iota_R(x, x0), T)


@dataclass
class FlowScaleReport:
    T: float
    R: float
    alpha: float
    eps: float
    worst_margin: float
    checked: int
    case_counts: Dict[str, int]
    attempts: List[Dict[str, Any]]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _scale_pair_check(
    x: Point, s: Point, x0: Point, T: float, R: float, alpha: float, eps: float, params: FlowSpaceParams
) -> Tuple[bool, float, str]:
    sx = _add(x, s)
    c = f_TR(rho_R(sx, x0, R), x0, T)
    c2 = f_TR(x, x0, T).translate(s)
    case = "I" if distance(sx, x0) <= T else "II"
    hint = distance(c(0.0), sx) - distance(c2(0.0), sx)
    try:
        decision = dfol_check(c, c2, alpha, eps, params, hint=hint)
    except Undecided as e:
        return False, float(e.details.get("margin", 0.0)), case
    return decision.holds, decision.minimum - eps, case


def flow_scale_search(
    S: Sequence[Sequence[float]],
    eps: float,
    samples: int = 1000,
    seed: int = 0,
    x0: Optional[Sequence[float]] = None,
    radii: Sequence[float] = (4, 8, 16, 32, 64, 128, 256, 512),
    screen: int = 32,
    params: Optional[FlowSpaceParams] = None,
) -> FlowScaleReport:
    """Find (T, R) making f^{T,R} = phi_T o iota_R (alpha, eps)-equivariant on sampled points.

    R doubles; for each R the times T = R - m for m = R/2, R/4, ..., 2 are
    screened on a small batch and the first survivor is verified on the
    full sample.

    Raises:
        SearchBudgetExceeded: If no grid pair passes.
    """
    if eps <= 0:
        raise PreconditionFailed(f"eps must be positive, got {eps}")
    letters = _symmetric(S)
    n = len(letters[0])
    x0 = tuple(x0) if x0 is not None else (0.0,) * n
    params = params or FlowSpaceParams(n, tolerance=min(1e-4, eps / 100))
    alpha = max(_norm(s) for s in letters)
    rng = np.random.default_rng(seed)
    attempts: List[Dict[str, Any]] = []

    for R in radii:
        m = R / 2
        times = []
        while m >= 2:
            times.append(R - m)
            m /= 2
        for T in times or [R / 2]:
            batch = _sample_ball(rng, x0, R, screen)
            if not all(
                _scale_pair_check(x, s, x0, T, R, alpha, eps, params)[0] for x in batch for s in letters
            ):
                attempts.append({"T": T, "R": R, "passed": False})
                continue
            worst = -INF
            cases = {"I": 0, "II": 0}
            passed = True
            for x in _sample_ball(rng, x0, R, samples):
                for s in letters:
                    ok, margin, case = _scale_pair_check(x, s, x0, T, R, alpha, eps, params)
                    cases[case] += 1
                    worst = max(worst, margin)
                    if not ok:
                        passed = False
                        break
                if not passed:
                    break
            attempts.append({"T": T, "R": R, "passed": passed})
            if passed:
                logger.info(f"Lemma search passed at T={T}, R={R} with worst margin {worst}")
                return FlowScaleReport(T, R, alpha, eps, worst, samples * len(letters), cases, attempts)
    raise SearchBudgetExceeded(
        f"No (T, R) pair passed for eps = {eps}", {"attempts": attempts}
    )


@dataclass
class LineCover:
    """Z-invariant cover of R by the open intervals (m - R - 1, m + R + 1), m in Z."""

    R: Fraction
    lo: int = -5
    hi: int = 5

    def __post_init__(self) -> None:
        self.R = Fraction(self.R)
        if self.R <= 0:
            raise PreconditionFailed(f"R must be positive, got {self.R}")

    def interval(self, m: int) -> Tuple[Fraction, Fraction]:
        return m - self.R - 1, m + self.R + 1

    def members_containing(self, x: Any) -> List[int]:
        x = Fraction(x)
        first = math.floor(x - self.R - 1) + 1
        return [m for m in range(first, math.ceil(x + self.R + 1)) if abs(x - m) < self.R + 1]

    def distance_to_complement(self, m: int, x: Any) -> Fraction:
        a, b = self.interval(m)
        return max(Fraction(0), min(Fraction(x) - a, b - Fraction(x)))

    def intersects(self, keys: Sequence[int]) -> bool:
        return max(keys) - min(keys) < 2 * self.R + 2

    def window(self) -> List[int]:
        return list(range(self.lo, self.hi + 1))

    def shift(self, m: int, k: int) -> int:
        """Index of k + (member m)."""
        return m + k

    def is_long_at(self, x: Any) -> bool:
        """Does [x - R, x + R] lie in a single member?"""
        x = Fraction(x)
        return any(a < x - self.R and x + self.R < b for a, b in map(self.interval, self.members_containing(x)))

    def max_multiplicity(self) -> int:
        """Exact maximum of the multiplicity over one period."""
        breaks = sorted({Fraction(0), Fraction(1), (self.R + 1) % 1, (-(self.R + 1)) % 1})
        points = list(breaks) + [(a + b) / 2 for a, b in zip(breaks, breaks[1:])]
        return max(len(self.members_containing(x)) for x in points)

    @property
    def dimension(self) -> int:
        return self.max_multiplicity() - 1

    def to_dict(self) -> dict:
        return {"rule": "line-intervals", "R": str(self.R), "window": [self.lo, self.hi]}


@dataclass
class LineCoverReport:
    R: Fraction
    invariant: bool
    long_checked: int
    long_passed: bool
    dimension: int
    isotropy: str = "trivial"

    def to_dict(self) -> dict:
        return {
            "R": str(self.R),
            "invariant": self.invariant,
            "long_checked": self.long_checked,
            "long_passed": self.long_passed,
            "dimension": self.dimension,
            "isotropy": self.isotropy,
        }


def line_cover(R: Any, samples: int = 100, seed: int = 0) -> Tuple[LineCover, LineCoverReport]:
    """Build the interval cover and check invariance, longness and dimension."""
    cover = LineCover(Fraction(R))
    invariant = all(
        tuple(x + 1 for x in cover.interval(m)) == cover.interval(cover.shift(m, 1)) for m in cover.window()
    )
    rng = np.random.default_rng(seed)
    xs = [Fraction(int(a), 10**6) for a in rng.integers(-10**7, 10**7, size=samples)]
    long_passed = all(cover.is_long_at(x) for x in xs)
    report = LineCoverReport(cover.R, invariant, samples, long_passed, cover.dimension)
    logger.info(f"Line cover at R={R}: {report.to_dict()}")
    return cover, report


def _primitive_direction(direction: Sequence[float], bound: int) -> Optional[Tuple[int, ...]]:
    """Integer vector w with entries at most ``bound`` and w/|w| = direction, if any."""
    biggest = max(range(len(direction)), key=lambda i: abs(direction[i]))
    pivot = direction[biggest]
    ratios = [Fraction(a / pivot).limit_denominator(max(bound, 1)) for a in direction]
    scale = math.lcm(*(r.denominator for r in ratios))
    w = [int(r * scale) * (1 if pivot > 0 else -1) for r in ratios]
    g = math.gcd(*w)
    w = [a // g for a in w]
    length = _norm(w)
    if any(abs(a / length - d) > UNIT_TOLERANCE for a, d in zip(w, direction)):
        return None
    return tuple(w)


def is_gamma_periodic(c: GeneralizedGeodesic, gamma: float) -> bool:
    """Is phi_tau(c) = g c for some 0 < tau <= gamma and translation g in Z^n?

    phi_tau shifts the bending times while a translation does not, so only
    complete lines qualify, and then g = tau * direction must be integral.
    Constant geodesics are excluded since the flow fixes them only with g = 0.
    """
    if not c.is_complete_line or gamma <= 0:
        return False
    w = _primitive_direction(c.direction, int(math.floor(gamma)))
    return w is not None and _norm(w) <= gamma + UNIT_TOLERANCE


def _fs_upper(a: GeneralizedGeodesic, b: GeneralizedGeodesic, params: FlowSpaceParams) -> float:
    """Upper end of the d_FS enclosure; exactly 0 when a == b."""
    value, error = d_fs_enclosure(a, b, params)
    return value + error


def _edge_cost(a: GeneralizedGeodesic, b: GeneralizedGeodesic, Lambda: float, params: FlowSpaceParams) -> float:
    if a == b:
        return 0.0
    direct = Lambda * _fs_upper(a, b, params)
    candidates = [0.0]
    if not a.is_constant:
        candidates.append(sum(x * y for x, y in zip(_sub(b(0.0), a(0.0)), a.direction)))
    candidates.extend(direct * k / 20.0 for k in range(-20, 21))
    best = direct
    for t in candidates:
        if abs(t) >= best:
            continue
        best = min(best, abs(t) + Lambda * _fs_upper(flow(a, t), b, params))
    return best


def d_lambda_upper(
    x: GeneralizedGeodesic,
    y: GeneralizedGeodesic,
    Lambda: float,
    waypoints: Sequence[GeneralizedGeodesic] = (),
    params: Optional[FlowSpaceParams] = None,
) -> float:
    """Shortest path through waypoints where one step costs |t| + Lambda * d_FS(phi_t a, b).

    d_FS enters through the upper end of its enclosure, so the result bounds
    d_Lambda from above; a step that flows a exactly onto b costs |t|.
    """
    if x == y:
        return 0.0
    params = params or FlowSpaceParams(x.n)
    nodes: List[GeneralizedGeodesic] = [x]
    for w in waypoints:
        if w not in nodes and w != y:
            nodes.append(w)
    nodes.append(y)
    k = len(nodes)
    cost = [[0.0 if i == j else _edge_cost(nodes[i], nodes[j], Lambda, params) for j in range(k)] for i in range(k)]
    dist = [INF] * k
    dist[0] = 0.0
    heap = [(0.0, 0)]
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist[i]:
            continue
        for j in range(k):
            nd = d + cost[i][j]
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(heap, (nd, j))
    return dist[k - 1]
