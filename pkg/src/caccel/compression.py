"""Input compression: translate symbols toward the origin at a chosen
direction, packing them k-per-cell along each axis.

The dynamics factor into two independent one-dimensional processes (one
per axis): every row packs horizontally on the same schedule because all
rows share the input width, and likewise for columns.  In one axis,
movers slide toward zero at the direction speed and are absorbed into a
pile that grows k sources per cell; the pile's append frontier always
sits directly behind the leftmost mover, which is what makes the rule
decidable from the bounded forward/backward window.

A meta-step of a layer costs p base steps, where p is the integer
scaling that made the direction vector integral.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

from . import geometry
from .errors import CaccelError
from .geometry import Cell, Neighborhood, RPoint

Symbol = object


class CompressionError(CaccelError):
    pass


def rho(c: Cell, k: int) -> frozenset[Cell]:
    """Source cells whose symbols end up packed at c."""
    if k < 1:
        raise CompressionError("k must be >= 1")
    return frozenset((k * c[0] + i, k * c[1] + j) for i in range(k) for j in range(k))


def rho_inverse(c: Cell, k: int) -> Cell:
    if k < 1:
        raise CompressionError("k must be >= 1")
    return (c[0] // k, c[1] // k)


# ---------------------------------------------------------------------------
# One-dimensional packing process


@dataclass
class LineProcess:
    """Sources 0..n-1 move toward zero at `speed` per step and pile up k to a
    cell.  Source 0 starts absorbed; absorption happens in source order, so
    the halted set is always a prefix and movers occupy consecutive positions
    directly ahead of the pile's append frontier."""

    n: int
    k: int
    speed: int

    def __post_init__(self):
        if self.n < 1 or self.k < 2 or self.speed < 1:
            raise CompressionError("need n >= 1, k >= 2, speed >= 1")
        self.t = 0
        self.halt: list[int | None] = [None] * self.n
        self.dest: list[int | None] = [None] * self.n
        self.slot: list[int | None] = [None] * self.n
        self.halt[0], self.dest[0], self.slot[0] = 0, 0, 0
        self.absorbed = 1

    def copy(self) -> "LineProcess":
        other = LineProcess.__new__(LineProcess)
        other.n, other.k, other.speed, other.t = self.n, self.k, self.speed, self.t
        other.halt = list(self.halt)
        other.dest = list(self.dest)
        other.slot = list(self.slot)
        other.absorbed = self.absorbed
        return other

    @property
    def done(self) -> bool:
        return self.absorbed == self.n

    def step(self) -> None:
        t1 = self.t + 1
        k, v = self.k, self.speed
        p = self.absorbed
        for s in range(self.absorbed, self.n):
            cell = p // k
            if s - t1 * v <= cell:
                self.halt[s], self.dest[s], self.slot[s] = t1, cell, p % k
                p += 1
            else:
                break
        self.absorbed = p
        self.t = t1

    def run_to_completion(self, guard: int) -> int:
        while not self.done:
            if self.t > guard:
                raise CompressionError("packing did not terminate within the guard")
            self.step()
        return max(t for t in self.halt if t is not None)

    # --- views -------------------------------------------------------------

    def mover_position(self, s: int) -> int | None:
        """Current position of source s, or None once absorbed."""
        if self.halt[s] is not None and self.halt[s] <= self.t:
            return None
        return s - self.t * self.speed

    def cell_fill(self, e: int) -> int:
        if e < 0:
            return 0
        return min(self.k, max(0, self.absorbed - self.k * e))

    def placement(self, s: int) -> tuple[str, int, int]:
        """('packed', cell, slot) or ('flying', position, source mod k)."""
        if self.halt[s] is not None and self.halt[s] <= self.t:
            return ("packed", self.dest[s], self.slot[s])
        return ("flying", s - self.t * self.speed, s % self.k)

    def cell_completion(self, e: int) -> int:
        """Step at which cell e's buffer last changed (its content is final)."""
        lo, hi = self.k * e, min(self.k * (e + 1), self.n)
        if lo >= hi:
            raise CompressionError(f"cell {e} outside the packed domain")
        times = [self.halt[s] for s in range(lo, hi)]
        if any(t is None for t in times):
            raise CompressionError("completion queried before the line finished")
        return max(times)  # type: ignore[arg-type]


def line_local_step(e: int, k: int, speed: int, back: int,
                    read: Callable[[int], tuple[int, object | None]]) -> tuple[int, object | None]:
    """One step of the line rule at cell e, computed only from the window
    [e-back, e+speed].

    `read(p)` returns (pile fill at p, mover tag at p or None); callers must
    only be asked about window positions.  Returns (new fill, new mover).
    Used as the windowed cross-check of `LineProcess.step`.
    """
    lo, hi = e - back, e + speed
    mover_at = {p: read(p)[1] for p in range(max(lo, 0), hi + 1)}
    fill_e = read(e)[0] if e >= 0 else 0
    movers = [p for p in sorted(mover_at) if mover_at[p] is not None]
    incoming = mover_at.get(e + speed)
    if not movers:
        return fill_e, None
    q0 = movers[0]
    if q0 == lo and lo > 0:
        # The mover chain extends beyond the window; absorptions stay behind it.
        return fill_e, incoming
    # q0 is the global leftmost mover, so the append frontier is q0 - 1.
    if q0 == 0:
        return fill_e, incoming  # unreachable from picture starts; be conservative
    pending = k * (q0 - 1) + read(q0 - 1)[0]
    new_fill = fill_e
    absorbed_past_e = False
    for q in range(q0, hi + 1):
        if mover_at.get(q) is None:
            break
        cell = pending // k
        if q - speed <= cell:
            if cell == e:
                new_fill += 1
            if q == e + speed:
                absorbed_past_e = True
            pending += 1
        else:
            break
    survived = incoming is not None and not absorbed_past_e
    return new_fill, incoming if survived else None


# ---------------------------------------------------------------------------
# Layers


@dataclass(frozen=True)
class CompressionLayer:
    """One direction-specific compression: factor k, integer direction (x, y)
    obtained by scaling a hull corner by p, and the forward/backward windows
    the local rule reads."""

    neighborhood: Neighborhood
    k: int
    corner: RPoint
    p: int
    direction: Cell
    backward: Cell

    @property
    def meta_window(self) -> tuple[Cell, Cell]:
        return self.direction, self.backward


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def build_layer(n: Neighborhood, k: int, corner: RPoint) -> CompressionLayer:
    """Validate and assemble a layer for one direction-set corner.

    The backward window must fit inside the hull of the p-th power; when the
    ceilinged 1/(k-1) rectangle pokes outside (k-1 not dividing the scaled
    direction), the scale is multiplied by k-1, which makes the backward
    rectangle exact and therefore inside the hull.
    """
    geometry.require_complete(n)
    k0 = geometry.k0_min(n)
    if k < max(2, k0):
        raise CompressionError(f"k={k} below the minimal usable factor {max(2, k0)}")
    hull = geometry.convex_hull(n)
    cx, cy = Fraction(corner[0]), Fraction(corner[1])
    if cx <= 0 or cy <= 0:
        raise CompressionError("corner must have positive coordinates")
    if not hull.contains((cx, cy)):
        raise CompressionError(f"corner {corner} outside the hull")

    def attempt(p: int) -> CompressionLayer | None:
        x, y = int(cx * p), int(cy * p)
        bx, by = _ceil_div(x, k - 1), _ceil_div(y, k - 1)
        for q in ((Fraction(-bx, p), Fraction(-by, p)),
                  (Fraction(-bx, p), Fraction(0)),
                  (Fraction(0), Fraction(-by, p))):
            if not hull.contains(q):
                return None
        return CompressionLayer(neighborhood=n, k=k, corner=(cx, cy),
                                p=p, direction=(x, y), backward=(bx, by))

    p0, _, _ = geometry.scale_to_integer((cx, cy))
    layer = attempt(p0)
    if layer is None:
        layer = attempt(p0 * (k - 1))
    if layer is None:
        raise CompressionError(f"backward window for corner {corner} escapes the hull")
    return layer


@dataclass
class LayerState:
    """Steppable state of one layer on one picture (meta-step granularity)."""

    layer: CompressionLayer
    picture: "object"
    xline: LineProcess
    yline: LineProcess

    @staticmethod
    def initial(layer: CompressionLayer, picture) -> "LayerState":
        x, y = layer.direction
        return LayerState(layer, picture,
                          LineProcess(picture.width, layer.k, x),
                          LineProcess(picture.height, layer.k, y))

    @property
    def t(self) -> int:
        return self.xline.t

    @property
    def settled(self) -> bool:
        return self.xline.done and self.yline.done

    def validate(self) -> None:
        for line in (self.xline, self.yline):
            # absorbed is a prefix count; buffers are anchored by construction
            if any(line.halt[s] is None for s in range(line.absorbed)):
                raise CompressionError("buffer not lower-left anchored")

    def content_positions(self) -> dict[Cell, list[tuple[Cell, Symbol]]]:
        """Where every input symbol currently sits (packed or in flight)."""
        out: dict[Cell, list[tuple[Cell, Symbol]]] = {}
        for sx in range(self.picture.width):
            px = self.xline.placement(sx)
            for sy in range(self.picture.height):
                py = self.yline.placement(sy)
                cell = (px[1], py[1])
                out.setdefault(cell, []).append(((sx, sy), self.picture[(sx, sy)]))
        return out

    def buffer_occupancy(self) -> dict[Cell, int]:
        """Symbols halted in both axes, per packed cell."""
        out: Counter = Counter()
        for sx in range(self.picture.width):
            px = self.xline.placement(sx)
            if px[0] != "packed":
                continue
            for sy in range(self.picture.height):
                py = self.yline.placement(sy)
                if py[0] == "packed":
                    out[(px[1], py[1])] += 1
        return dict(out)

    def content_multiset(self) -> Counter:
        return Counter(sym for cells in self.content_positions().values()
                       for _, sym in cells)

    def render(self) -> str:
        """Trace grid: `.` empty, base-36 digit for partial buffers, `#` full."""
        k2 = self.layer.k ** 2
        occ = self.buffer_occupancy()
        width, height = self.picture.width, self.picture.height
        rows = []
        for y in range(height - 1, -1, -1):
            row = []
            for x in range(width):
                c = occ.get((x, y), 0)
                if c == 0:
                    row.append(".")
                elif c == k2:
                    row.append("#")
                else:
                    row.append("0123456789abcdefghijklmnopqrstuvwxyz"[min(c, 35)])
            rows.append("".join(row))
        return "\n".join(rows)


def layer_step(layer: CompressionLayer, state: LayerState) -> LayerState:
    """One meta-step (p base steps) of the layer's local rule."""
    if state.layer is not layer and state.layer != layer:
        raise CompressionError("state belongs to a different layer")
    state.validate()
    nxt = LayerState(layer, state.picture, state.xline.copy(), state.yline.copy())
    nxt.xline.step()
    nxt.yline.step()
    return nxt


@dataclass(frozen=True)
class PackedCell:
    """Final content of one packed cell: a lower-left-anchored rectangle of
    input symbols inside [0,k)^2, plus per-axis fullness flags."""

    buffer: Mapping[Cell, Symbol]
    full_x: bool
    full_y: bool


@dataclass(frozen=True)
class CompressionRun:
    layer: CompressionLayer
    final: Mapping[Cell, PackedCell]
    completion: Mapping[Cell, int]  # base steps
    meta_duration: int

    @property
    def duration(self) -> int:
        return max(self.completion.values())


def run_compression(layer: CompressionLayer, picture) -> CompressionRun:
    """Run the layer to quiescence and package placements plus completion times.

    The final placement produced by the pile dynamics is checked against the
    k-block map of the input as a hard postcondition.
    """
    n, m, k = picture.width, picture.height, layer.k
    guard = 8 * (n + m) + 64
    xline = LineProcess(n, k, layer.direction[0])
    yline = LineProcess(m, k, layer.direction[1])
    xline.run_to_completion(guard)
    yline.run_to_completion(guard)
    meta_duration = max(xline.t, yline.t)

    pw, ph = _ceil_div(n, k), _ceil_div(m, k)
    final: dict[Cell, PackedCell] = {}
    completion: dict[Cell, int] = {}
    for cx in range(pw):
        for cy in range(ph):
            buf: dict[Cell, Symbol] = {}
            for sx in range(k * cx, min(k * (cx + 1), n)):
                if xline.dest[sx] != cx:
                    raise CompressionError("x placement disagrees with the block map")
                for sy in range(k * cy, min(k * (cy + 1), m)):
                    if yline.dest[sy] != cy:
                        raise CompressionError("y placement disagrees with the block map")
                    buf[(xline.slot[sx], yline.slot[sy])] = picture[(sx, sy)]
            for (i, j) in buf:
                if (i, j) != (i % k, j % k) or ((i - 1, j) not in buf and i > 0) \
                        or ((i, j - 1) not in buf and j > 0):
                    raise CompressionError("buffer not a lower-left-anchored rectangle")
            final[(cx, cy)] = PackedCell(
                buffer=buf,
                full_x=all((i, 0) in buf for i in range(k)),
                full_y=all((0, j) in buf for j in range(k)),
            )
            completion[(cx, cy)] = layer.p * max(xline.cell_completion(cx),
                                                 yline.cell_completion(cy))
    # hard postcondition: buffers equal the input restricted to their block
    for (cx, cy), cellv in final.items():
        for (i, j), sym in cellv.buffer.items():
            if picture[(k * cx + i, k * cy + j)] != sym:
                raise CompressionError("final packing disagrees with the block map")
    return CompressionRun(layer=layer, final=final, completion=completion,
                          meta_duration=meta_duration)


@dataclass(frozen=True)
class MultiLayerResult:
    plan: geometry.DirectionPlan
    layers: tuple[CompressionLayer, ...]
    runs: tuple[CompressionRun, ...]
    best_index: int

    @property
    def best_completion(self) -> int:
        return self.runs[self.best_index].duration


def multi_layer(n: Neighborhood, k: int, epsilon: Fraction, picture) -> MultiLayerResult:
    """Run one compression per direction-set corner with positive coordinates.

    Arc extremities sit on the axes and cannot drive movement along the zero
    axis, so no layer is built for them; every achievable input proportion
    still has a corner within the spacing bound.
    """
    epsilon = Fraction(epsilon)
    k0 = geometry.k0_min(n)
    kmin = max(k0, _ceil_div(epsilon.denominator, epsilon.numerator))
    if k < kmin:
        raise CompressionError(f"k={k} below max(k0, ceil(1/epsilon)) = {kmin}")
    plan = geometry.direction_set(n, epsilon)
    layers = tuple(build_layer(n, k, c) for c in plan.positive_corners())
    if not layers:
        raise CompressionError("no usable corners in the direction plan")
    runs = tuple(run_compression(layer, picture) for layer in layers)
    first = runs[0].final
    for other in runs[1:]:
        if other.final != first:
            raise CompressionError("layers disagree on the final packed content")
    best = min(range(len(runs)), key=lambda i: (runs[i].duration, i))
    return MultiLayerResult(plan=plan, layers=layers, runs=runs, best_index=best)
