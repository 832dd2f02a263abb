"""Exact integer/rational geometry of 2D neighborhoods.

Everything here is lattice-set algebra (Minkowski sums, powers, scalar
images) and exact rational convex-hull geometry (membership, ray exits,
inscribed squares and rectangles).  No floating point is used anywhere:
hull computations run on integers, derived quantities are `Fraction`s,
so results are reproducible bit for bit.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator

from .errors import CaccelError, ParseError

Cell = tuple[int, int]
RPoint = tuple[Fraction, Fraction]

ORIGIN: Cell = (0, 0)
UNIT_CROSS: frozenset[Cell] = frozenset([(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)])


class GeometryError(CaccelError):
    pass


class Completeness(Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Neighborhood:
    """A finite nonempty set of integer offsets."""

    offsets: frozenset[Cell]

    def __post_init__(self):
        if not self.offsets:
            raise GeometryError("neighborhood must be nonempty")
        for o in self.offsets:
            if not (isinstance(o, tuple) and len(o) == 2
                    and isinstance(o[0], int) and isinstance(o[1], int)):
                raise GeometryError(f"offset {o!r} is not an integer pair")

    @staticmethod
    def of(points: Iterable[Cell]) -> "Neighborhood":
        return Neighborhood(frozenset((int(x), int(y)) for x, y in points))

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.offsets)

    def __len__(self) -> int:
        return len(self.offsets)

    def __contains__(self, cell: Cell) -> bool:
        return cell in self.offsets

    @property
    def sorted_offsets(self) -> tuple[Cell, ...]:
        return tuple(sorted(self.offsets))

    @property
    def max_magnitude(self) -> int:
        """Largest Chebyshev norm over the offsets."""
        return max(max(abs(x), abs(y)) for x, y in self.offsets)

    def with_origin(self) -> "Neighborhood":
        return self if ORIGIN in self.offsets else Neighborhood(self.offsets | {ORIGIN})


VON_NEUMANN = Neighborhood.of([(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)])
MOORE = Neighborhood.of([(x, y) for x in (-1, 0, 1) for y in (-1, 0, 1)])


# ---------------------------------------------------------------------------
# Minkowski algebra


def minkowski_sum(a: Neighborhood, b: Neighborhood) -> Neighborhood:
    """Pointwise vector sum {u+v | u in a, v in b}, deduplicated."""
    return Neighborhood(frozenset(
        (x1 + x2, y1 + y2) for x1, y1 in a.offsets for x2, y2 in b.offsets))


def _sum_sets(a: frozenset[Cell], b: frozenset[Cell]) -> frozenset[Cell]:
    return frozenset((x1 + x2, y1 + y2) for x1, y1 in a for x2, y2 in b)


@lru_cache(maxsize=None)
def power(n: Neighborhood, k: int) -> Neighborhood:
    """k-fold Minkowski power; sums of exactly k offsets, with n^0 = {origin}."""
    if k < 0:
        raise GeometryError("power exponent must be nonnegative")
    if k == 0:
        return Neighborhood(frozenset([ORIGIN]))
    prev = power(n, k - 1)
    return Neighborhood(_sum_sets(prev.offsets, n.offsets))


def scalar(n: Neighborhood, k: int) -> Neighborhood:
    """Pointwise scalar image {k*v | v in n}."""
    return Neighborhood(frozenset((k * x, k * y) for x, y in n.offsets))


# ---------------------------------------------------------------------------
# Convex hull


def _cross(o: tuple, a: tuple, b: tuple):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True)
class RationalPolygon:
    """A convex polygon with exact rational vertices, counterclockwise.

    One vertex encodes a single point, two encode a segment; both count
    as degenerate.  Membership tests are exact.
    """

    vertices: tuple[RPoint, ...]

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 3

    def edges(self) -> Iterator[tuple[RPoint, RPoint]]:
        vs = self.vertices
        for i in range(len(vs)):
            yield vs[i], vs[(i + 1) % len(vs)]

    def contains(self, p: tuple, strict: bool = False) -> bool:
        px, py = Fraction(p[0]), Fraction(p[1])
        vs = self.vertices
        if len(vs) == 1:
            return not strict and (px, py) == vs[0]
        if len(vs) == 2:
            if strict:
                return False
            a, b = vs
            if _cross(a, b, (px, py)) != 0:
                return False
            return (min(a[0], b[0]) <= px <= max(a[0], b[0])
                    and min(a[1], b[1]) <= py <= max(a[1], b[1]))
        for a, b in self.edges():
            c = _cross(a, b, (px, py))
            if c < 0 or (strict and c == 0):
                return False
        return True

    def ray_exit(self, direction: tuple) -> Fraction:
        """Largest t >= 0 with t*direction inside the polygon.

        Requires the origin strictly inside; the polygon being bounded
        guarantees the exit parameter exists.
        """
        if self.degenerate or not self.contains((0, 0), strict=True):
            raise GeometryError("ray_exit needs the origin strictly inside the hull")
        dx, dy = Fraction(direction[0]), Fraction(direction[1])
        if dx == 0 and dy == 0:
            raise GeometryError("direction must be nonzero")
        best: Fraction | None = None
        for a, b in self.edges():
            ex, ey = b[0] - a[0], b[1] - a[1]
            denom = ex * dy - ey * dx          # cross(edge, direction)
            num = ex * a[1] - ey * a[0]        # cross(edge, a)
            if denom < 0:
                t = num / denom
                if best is None or t < best:
                    best = t
        assert best is not None and best > 0
        return best

    def scaled(self, s: int) -> "RationalPolygon":
        return RationalPolygon(tuple((x * s, y * s) for x, y in self.vertices))


@lru_cache(maxsize=None)
def convex_hull(n: Neighborhood) -> RationalPolygon:
    """Exact convex hull of the offsets (monotone chain, integer arithmetic)."""
    pts = sorted(set(n.offsets))
    if len(pts) == 1:
        return RationalPolygon(((Fraction(pts[0][0]), Fraction(pts[0][1])),))
    lower: list[Cell] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Cell] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:
        hull = [pts[0], pts[-1]]  # all points collinear: keep the extremes
    i0 = hull.index(min(hull))
    hull = hull[i0:] + hull[:i0]
    return RationalPolygon(tuple((Fraction(x), Fraction(y)) for x, y in hull))


def convexify(n: Neighborhood) -> Neighborhood:
    """All lattice points inside the hull of n; a superset of n, idempotent."""
    hull = convex_hull(n)
    xs = [v[0] for v in hull.vertices]
    ys = [v[1] for v in hull.vertices]
    out = []
    for x in range(math.floor(min(xs)), math.ceil(max(xs)) + 1):
        for y in range(math.floor(min(ys)), math.ceil(max(ys)) + 1):
            if hull.contains((x, y)):
                out.append((x, y))
    return Neighborhood.of(out)


# ---------------------------------------------------------------------------
# Completeness


def _lattice_index(n: Neighborhood) -> int | None:
    """Index of the subgroup of Z^2 generated by the offsets, or None if rank < 2.

    For integer vectors the index equals gcd of all 2x2 minors divided by
    the squared content... computed via the Smith normal form invariants:
    d1 = gcd of entries, d1*d2 = gcd of 2x2 minors, index = d1*d2.
    """
    vecs = [v for v in n.offsets if v != ORIGIN]
    if not vecs:
        return None
    d1 = 0
    for x, y in vecs:
        d1 = math.gcd(d1, math.gcd(abs(x), abs(y)))
    minor_gcd = 0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            m = vecs[i][0] * vecs[j][1] - vecs[i][1] * vecs[j][0]
            minor_gcd = math.gcd(minor_gcd, abs(m))
    if minor_gcd == 0:
        return None  # all offsets collinear through the origin
    return minor_gcd


@lru_cache(maxsize=None)
def is_complete(n: Neighborhood, cap: int = 64) -> Completeness:
    """Semi-decide whether iterated powers of n cover the whole plane.

    A positive answer comes from finding k <= cap whose power contains the
    origin plus the four unit offsets (padding by such a power then reaches
    every cell).  Negative certificates: hull degenerate, origin not in the
    hull's interior, or the offsets generating a proper sublattice.
    """
    if cap < 1:
        raise GeometryError("cap must be >= 1")
    hull = convex_hull(n)
    if hull.degenerate or not hull.contains((0, 0), strict=True):
        return Completeness.INCOMPLETE
    if _lattice_index(n) != 1:
        return Completeness.INCOMPLETE
    cur = frozenset([ORIGIN])
    for _ in range(cap):
        cur = _sum_sets(cur, n.offsets)
        if UNIT_CROSS <= cur:
            return Completeness.COMPLETE
    return Completeness.UNKNOWN


def require_complete(n: Neighborhood, cap: int = 64) -> None:
    verdict = is_complete(n, cap)
    if verdict is not Completeness.COMPLETE:
        raise GeometryError(f"neighborhood is {verdict.value}; a complete one is required")


# ---------------------------------------------------------------------------
# Arrival times and real time


@lru_cache(maxsize=None)
def _arrival_box(n: Neighborhood, width: int, height: int) -> dict[Cell, int]:
    """BFS shortest N-step counts from the origin over a padded box.

    The padding R = max_magnitude*(width+height) is far larger than any
    detour a shortest sum decomposition can need (prefix sums of a
    rearranged decomposition stay within a constant of the straight
    segment), so clipping to the box never changes distances.
    """
    pad = n.max_magnitude * (width + height)
    lo_x, hi_x = -pad, width - 1 + pad
    lo_y, hi_y = -pad, height - 1 + pad
    steps = tuple(n.offsets)
    dist: dict[Cell, int] = {ORIGIN: 0}
    queue: deque[Cell] = deque([ORIGIN])
    while queue:
        cx, cy = queue.popleft()
        d1 = dist[(cx, cy)] + 1
        for ox, oy in steps:
            nxt = (cx + ox, cy + oy)
            if nxt in dist:
                continue
            if not (lo_x <= nxt[0] <= hi_x and lo_y <= nxt[1] <= hi_y):
                continue
            dist[nxt] = d1
            queue.append(nxt)
    return dist


def arrival_times(n: Neighborhood, width: int, height: int) -> dict[Cell, int]:
    """Minimal k with c in n^k, for every cell of the width x height rectangle."""
    if width < 1 or height < 1:
        raise GeometryError("rectangle dimensions must be positive")
    require_complete(n)
    dist = _arrival_box(n, width, height)
    out: dict[Cell, int] = {}
    for x in range(width):
        for y in range(height):
            d = dist.get((x, y))
            if d is None:
                raise GeometryError(
                    f"padding exhausted before covering ({x},{y}); "
                    "the neighborhood cannot reach the rectangle")
            out[(x, y)] = d
    return out


def real_time(n: Neighborhood, width: int, height: int) -> int:
    """Least t with the whole rectangle inside n^t.

    Requires the origin among the offsets so that powers are nested and
    the maximum of per-cell arrival times is the cover time.
    """
    if ORIGIN not in n.offsets:
        raise GeometryError("real_time requires the origin offset (nested powers)")
    return max(arrival_times(n, width, height).values())


def real_time_table(n: Neighborhood, wmax: int, hmax: int) -> dict[tuple[int, int], int]:
    """real_time(n, w, h) for all 1 <= w <= wmax, 1 <= h <= hmax, in one sweep."""
    if ORIGIN not in n.offsets:
        raise GeometryError("real_time requires the origin offset (nested powers)")
    arr = arrival_times(n, wmax, hmax)
    table: dict[tuple[int, int], int] = {}
    col_max = [0] * wmax
    for h in range(1, hmax + 1):
        running = 0
        for w in range(1, wmax + 1):
            col_max[w - 1] = max(col_max[w - 1], arr[(w - 1, h - 1)])
            running = max(running, col_max[w - 1])
            table[(w, h)] = running
    return table


# ---------------------------------------------------------------------------
# Construction constants


@lru_cache(maxsize=None)
def tau_sync(n: Neighborhood, cap: int = 256) -> int:
    """Minimal t >= 1 with the mirrored neighborhood inside the t-th power."""
    require_complete(n)
    neg = scalar(n, -1).offsets
    cur = frozenset([ORIGIN])
    for t in range(1, cap + 1):
        cur = _sum_sets(cur, n.offsets)
        if neg <= cur:
            return t
    raise GeometryError(f"no t <= {cap} with -n inside n^t")


@lru_cache(maxsize=None)
def alpha_group(n: Neighborhood, k: int) -> int:
    """Minimal a with n^a + k*n == n^a + n^k (exact set equality).

    Since k*n is a subset of n^k the left side is always included in the
    right, so equality reduces to a size comparison.  The counting bound
    a <= |n|(k-1) - k + 1 guarantees termination.
    """
    if k < 1:
        raise GeometryError("k must be >= 1")
    require_complete(n)
    bound = len(n) * (k - 1) - k + 1
    kn = scalar(n, k).offsets
    pa = frozenset([ORIGIN])          # n^a
    nk = power(n, k).offsets          # n^(a+k)
    for a in range(max(bound, 0) + 1):
        left = _sum_sets(pa, kn)
        if len(left) == len(nk):
            return a
        pa = _sum_sets(pa, n.offsets)
        nk = _sum_sets(nk, n.offsets)
    raise GeometryError(f"no a within the counting bound {bound}")


def k0_min(n: Neighborhood, kmax: int = 64) -> int:
    """Minimal k >= 2 whose hull contains its own image scaled by -1/(k-1)."""
    require_complete(n)
    hull = convex_hull(n)
    if not hull.contains((0, 0), strict=True):
        raise GeometryError("origin must be interior to the hull")
    for k in range(2, kmax + 1):
        r = Fraction(-1, k - 1)
        if all(hull.contains((v[0] * r, v[1] * r)) for v in hull.vertices):
            return k
    raise GeometryError(f"not found <= {kmax}")


def eta_square(n: Neighborhood) -> Fraction:
    """Side of the largest axis-aligned square [0,s]^2 inside the hull."""
    require_complete(n)
    hull = convex_hull(n)
    return min(hull.ray_exit((1, 0)), hull.ray_exit((0, 1)), hull.ray_exit((1, 1)))


def max_rectangle(n: Neighborhood, ratio: Fraction) -> RPoint:
    """Corner (x, y), x/y = ratio, of the largest such rectangle in the hull."""
    ratio = Fraction(ratio)
    if ratio <= 0:
        raise GeometryError("ratio must be positive")
    require_complete(n)
    hull = convex_hull(n)
    t = hull.ray_exit((ratio, Fraction(1)))
    return (ratio * t, t)


@dataclass(frozen=True)
class DirectionPlan:
    """Rational points along the hull's positive-quadrant boundary arc.

    Consecutive points are at Euclidean distance at most `spacing`; the
    list runs from the positive x-axis extremity to the y-axis one and
    includes every hull vertex strictly inside the quadrant.
    """

    eta: Fraction
    corners: tuple[RPoint, ...]
    spacing: Fraction

    def positive_corners(self) -> tuple[RPoint, ...]:
        return tuple(c for c in self.corners if c[0] > 0 and c[1] > 0)


def _ceil_sqrt_ratio(num: Fraction) -> int:
    """Smallest integer m with m*m >= num (num a nonnegative rational)."""
    if num <= 0:
        return 0
    p, q = num.numerator, num.denominator
    m = math.isqrt(p // q)
    while m * m * q < p:
        m += 1
    return m


def direction_set(n: Neighborhood, epsilon: Fraction) -> DirectionPlan:
    """Sample the corner arc at spacing <= epsilon*eta.

    Arc extremities (on the axes) and every hull vertex strictly inside
    the positive quadrant are always included; edge interiors are split
    evenly so that no gap exceeds the spacing bound.
    """
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise GeometryError("epsilon must be positive")
    require_complete(n)
    hull = convex_hull(n)
    eta = eta_square(n)
    spacing = epsilon * eta

    ex: RPoint = (hull.ray_exit((1, 0)), Fraction(0))
    ey: RPoint = (Fraction(0), hull.ray_exit((0, 1)))

    def on_segment(a: RPoint, b: RPoint, p: RPoint) -> bool:
        if _cross(a, b, p) != 0:
            return False
        return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))

    vs = hull.vertices
    m = len(vs)
    start = None
    for i in range(m):
        if vs[i] == ex:
            start = i
            break
        if on_segment(vs[i], vs[(i + 1) % m], ex) and vs[(i + 1) % m] != ex:
            start = i
            break
    if start is None:
        raise GeometryError("x-axis extremity not found on the hull boundary")

    # Walk the boundary counterclockwise from ex until ey is reached.
    waypoints: list[RPoint] = [ex]
    i = start
    for _ in range(m + 1):
        end = vs[(i + 1) % m]
        if on_segment(waypoints[-1], end, ey):
            waypoints.append(ey)
            break
        if end[0] > 0 and end[1] > 0:
            waypoints.append(end)
        i = (i + 1) % m
    else:
        raise GeometryError("failed to trace the positive-quadrant arc")

    corners: list[RPoint] = [waypoints[0]]
    for a, b in zip(waypoints, waypoints[1:]):
        if a == b:
            continue
        d2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
        pieces = max(1, _ceil_sqrt_ratio(d2 / (spacing * spacing)))
        for j in range(1, pieces + 1):
            t = Fraction(j, pieces)
            corners.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    plan = DirectionPlan(eta=eta, corners=tuple(corners), spacing=spacing)
    _validate_plan(hull, plan)
    return plan


def _validate_plan(hull: RationalPolygon, plan: DirectionPlan) -> None:
    for c in plan.corners:
        if c[0] < 0 or c[1] < 0 or not hull.contains(c):
            raise GeometryError(f"corner {c} outside the positive-quadrant arc")
    for a, b in zip(plan.corners, plan.corners[1:]):
        d2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
        if d2 > plan.spacing ** 2:
            raise GeometryError("consecutive corners exceed the spacing bound")
    for q in ((plan.eta, Fraction(0)), (Fraction(0), plan.eta), (plan.eta, plan.eta)):
        if not hull.contains(q):
            raise GeometryError("inscribed square corner outside the hull")


def scale_to_integer(point: RPoint) -> tuple[int, int, int]:
    """Minimal p making p*point integral; returns (p, x, y)."""
    px, py = Fraction(point[0]), Fraction(point[1])
    if px <= 0 or py <= 0:
        raise GeometryError("point must have positive coordinates")
    p = math.lcm(px.denominator, py.denominator)
    return p, int(px * p), int(py * p)


# ---------------------------------------------------------------------------
# Text format and generators


def parse_neighborhood_offsets(text: str) -> tuple[Cell, ...]:
    """One `dx dy` pair per line, in file order; `#` starts a comment;
    duplicates rejected."""
    seen: list[Cell] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected `dx dy`, got {raw.strip()!r}", lineno)
        try:
            cell = (int(parts[0]), int(parts[1]))
        except ValueError:
            raise ParseError(f"offsets must be integers, got {raw.strip()!r}", lineno)
        if cell in seen:
            raise ParseError(f"duplicate offset {cell}", lineno)
        seen.append(cell)
    if not seen:
        raise ParseError("no offsets found")
    return tuple(seen)


def parse_neighborhood(text: str) -> Neighborhood:
    return Neighborhood(frozenset(parse_neighborhood_offsets(text)))


def format_neighborhood(n: Neighborhood) -> str:
    return "\n".join(f"{x} {y}" for x, y in n.sorted_offsets) + "\n"


def parse_fraction(text: str) -> Fraction:
    """Rationals are written `p/q` or a bare integer; no decimal points."""
    text = text.strip()
    if "." in text:
        raise ParseError(f"rational {text!r} must be written p/q, not a decimal")
    try:
        if "/" in text:
            p, q = text.split("/", 1)
            return Fraction(int(p), int(q))
        return Fraction(int(text))
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"cannot parse rational {text!r}")


def random_complete_neighborhood(rng, max_tries: int = 200) -> Neighborhood:
    """Sample 4..9 offsets in [-3,3]^2 with the origin and one negative-quadrant
    offset forced, discarding draws that are not certified complete."""
    for _ in range(max_tries):
        count = rng.randint(4, 9)
        offs = {ORIGIN, (rng.randint(-3, -1), rng.randint(-3, -1))}
        while len(offs) < count:
            offs.add((rng.randint(-3, 3), rng.randint(-3, 3)))
        n = Neighborhood(frozenset(offs))
        if is_complete(n) is Completeness.COMPLETE:
            return n
    raise GeometryError("failed to sample a complete neighborhood")
