"""Core cellular-automaton semantics.

Configurations are sparse maps over a quiescent background; the global
step only re-evaluates cells whose window can see a stored cell, which
keeps every run finite.  Rules are callables over a tuple of neighbor
states in the automaton's fixed offset order; explicit tables use
`TableRule`, constructed machines use closures (optionally memoized).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable, Hashable, Iterable, Mapping

from . import geometry
from .errors import CaccelError, ParseError
from .geometry import Cell, Neighborhood

State = Hashable


class EngineError(CaccelError):
    pass


class TableRule:
    """Local rule backed by an explicit (possibly partial) lookup table."""

    def __init__(self, table: Mapping[tuple, State]):
        self.table = dict(table)

    def __call__(self, window: tuple) -> State:
        try:
            return self.table[window]
        except KeyError:
            raise EngineError(f"rule table has no entry for neighbor tuple {window!r}")


def memoized_rule(fn: Callable[[tuple], State]) -> Callable[[tuple], State]:
    cache: dict = {}

    def rule(window: tuple) -> State:
        out = cache.get(window)
        if out is None:
            out = fn(window)
            cache[window] = out
        return out

    rule.__wrapped__ = fn  # type: ignore[attr-defined]
    return rule


@dataclass(frozen=True)
class Automaton:
    states: frozenset
    neighborhood: Neighborhood
    rule: Callable[[tuple], State]
    quiescent: State
    accepting: State | None = None
    rejecting: State | None = None
    offsets_order: tuple[Cell, ...] = ()
    name: str = ""
    # evaluate identical windows once per step; pays off for record states
    window_dedup: bool = False

    def __post_init__(self):
        if not self.offsets_order:
            object.__setattr__(self, "offsets_order", self.neighborhood.sorted_offsets)
        if set(self.offsets_order) != set(self.neighborhood.offsets):
            raise EngineError("offsets_order must enumerate the neighborhood exactly")
        if self.quiescent not in self.states:
            raise EngineError("quiescent state missing from the state set")

    @property
    def is_recognizer(self) -> bool:
        return self.accepting is not None and self.rejecting is not None


@dataclass(frozen=True)
class Configuration:
    """Sparse configuration: finitely many cells differing from `background`."""

    background: State
    cells: Mapping[Cell, State]

    def __post_init__(self):
        clean = {c: s for c, s in self.cells.items() if s != self.background}
        object.__setattr__(self, "cells", clean)

    def __getitem__(self, cell: Cell) -> State:
        return self.cells.get(cell, self.background)

    def translate(self, v: Cell) -> "Configuration":
        return Configuration(self.background,
                             {(x + v[0], y + v[1]): s for (x, y), s in self.cells.items()})

    def support(self) -> frozenset[Cell]:
        return frozenset(self.cells)


# ---------------------------------------------------------------------------
# Global dynamics


def check_quiescent(a: Automaton, q: State) -> bool:
    return a.rule(tuple(q for _ in a.offsets_order)) == q


def check_permanent(a: Automaton, q: State, samples: int = 10_000, seed: int = 0) -> bool:
    """Is q fixed regardless of the neighbors?

    Exhaustive when the rule is an explicit table; for computed rules only
    `samples` random windows are checked, so a True answer is evidence,
    not proof.
    """
    order = a.offsets_order
    try:
        center = order.index((0, 0))
    except ValueError:
        center = None
    rule = a.rule
    raw = getattr(rule, "__wrapped__", rule)
    if isinstance(raw, TableRule):
        for window, out in raw.table.items():
            if center is not None and window[center] != q:
                continue
            if out != q:
                return False
        return True
    rng = random.Random(seed)
    pool = sorted(a.states, key=repr)
    for _ in range(samples):
        window = tuple(rng.choice(pool) for _ in order)
        if center is not None:
            window = window[:center] + (q,) + window[center + 1:]
        if rule(window) != q:
            return False
    return True


def step(a: Automaton, c: Configuration) -> Configuration:
    """One synchronous application of the local rule everywhere."""
    if not check_quiescent(a, c.background):
        raise EngineError("configuration background is not quiescent for this automaton")
    order = a.offsets_order
    rule = a.rule
    bg = c.background
    cells = c.cells
    get = cells.get
    candidates = set(cells)
    for (x, y) in cells:
        for (ox, oy) in order:
            candidates.add((x - ox, y - oy))
    new_cells: dict[Cell, State] = {}
    if a.window_dedup:
        seen: dict[tuple, State] = {}
        miss = object()
        for (x, y) in candidates:
            window = tuple(get((x + ox, y + oy), bg) for ox, oy in order)
            out = seen.get(window, miss)
            if out is miss:
                out = rule(window)
                seen[window] = out
            if out != bg:
                new_cells[(x, y)] = out
    else:
        for (x, y) in candidates:
            window = tuple(get((x + ox, y + oy), bg) for ox, oy in order)
            out = rule(window)
            if out != bg:
                new_cells[(x, y)] = out
    return Configuration(bg, new_cells)


def run(a: Automaton, c: Configuration, t: int) -> Configuration:
    if t < 0:
        raise EngineError("time must be nonnegative")
    for _ in range(t):
        c = step(a, c)
    return c


# ---------------------------------------------------------------------------
# Pictures and recognition


@dataclass(frozen=True)
class Picture:
    width: int
    height: int
    symbols: Mapping[Cell, State]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise EngineError("picture dimensions must be positive")
        expected = {(x, y) for x in range(self.width) for y in range(self.height)}
        if set(self.symbols) != expected:
            raise EngineError("picture symbols must cover exactly its rectangle")

    def __getitem__(self, cell: Cell) -> State:
        return self.symbols[cell]

    def alphabet(self) -> frozenset:
        return frozenset(self.symbols.values())

    @staticmethod
    def from_rows(rows: list[str]) -> "Picture":
        """rows[0] is the top row; row 0 of the picture is the bottom one."""
        height = len(rows)
        width = len(rows[0])
        syms = {}
        for i, row in enumerate(rows):
            if len(row) != width:
                raise EngineError("ragged picture rows")
            y = height - 1 - i
            for x, ch in enumerate(row):
                syms[(x, y)] = ch
        return Picture(width, height, syms)

    def to_rows(self) -> list[str]:
        return ["".join(str(self.symbols[(x, y)]) for x in range(self.width))
                for y in range(self.height - 1, -1, -1)]


def parse_picture(text: str) -> Picture:
    """First line `n m`, then m rows of n single-character symbols, top first."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty picture file")
    head = lines[0].split()
    if len(head) != 2:
        raise ParseError("expected header `n m`", 1)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError("expected integer dimensions", 1)
    rows = [line.rstrip("\n") for line in lines[1:1 + m]]
    if len(rows) != m or any(len(r) != n for r in rows):
        raise ParseError(f"expected {m} rows of {n} symbols")
    return Picture.from_rows(rows)


def format_picture(p: Picture) -> str:
    return f"{p.width} {p.height}\n" + "\n".join(p.to_rows()) + "\n"


def picture_configuration(p: Picture, q0: State) -> Configuration:
    if q0 in p.alphabet():
        raise EngineError(f"quiescent state {q0!r} collides with the picture alphabet")
    return Configuration(q0, dict(p.symbols))


@dataclass(frozen=True)
class RecognitionResult:
    outcome: str  # accepted | rejected | undecided
    time: int | None


@dataclass(frozen=True)
class RecognitionProfile:
    """Declared timing of a recognizer: decision at rt(n, m) + slack(n, m)."""

    rt: Callable[[int, int], int]
    slack: Callable[[int, int], int]

    def decision_time(self, n: int, m: int) -> int:
        return self.rt(n, m) + self.slack(n, m)


_PERMANENCE_CHECKED: set[int] = set()


def default_deadline(a: Automaton, p: Picture) -> int:
    return 4 * geometry.real_time(a.neighborhood, p.width, p.height) + 64


def recognize(a: Automaton, p: Picture, deadline: int | None = None) -> RecognitionResult:
    """Run from the picture configuration until the origin commits.

    Accepting/rejecting states are permanent, so the first time the origin
    carries one is well defined and sticky; `undecided` if the deadline
    passes first.
    """
    if not a.is_recognizer:
        raise EngineError("automaton has no accepting/rejecting states")
    if deadline is None:
        deadline = default_deadline(a, p)
    if deadline < 0:
        raise EngineError("deadline must be nonnegative")
    if id(a) not in _PERMANENCE_CHECKED:
        for q in (a.accepting, a.rejecting):
            if not check_permanent(a, q):
                raise EngineError(f"state {q!r} is not permanent")
        _PERMANENCE_CHECKED.add(id(a))
    config = picture_configuration(p, a.quiescent)
    for t in range(deadline + 1):
        origin = config[(0, 0)]
        if origin == a.accepting:
            return RecognitionResult("accepted", t)
        if origin == a.rejecting:
            return RecognitionResult("rejected", t)
        if t < deadline:
            config = step(a, config)
    return RecognitionResult("undecided", None)


# ---------------------------------------------------------------------------
# Super-neighborhood lifting

BOT = ("inactive",)


def lift_superneighborhood(a: Automaton, n: Neighborhood, p: int) -> "LiftedAutomaton":
    """Simulate one step of `a` (working on a subset of n^p) per p steps on n.

    Cells alternate p-1 gathering phases with one transition phase; the
    record state is (phase, partial window map).  Projection at times p*t
    reproduces a's run at time t.
    """
    if p < 1:
        raise EngineError("p must be >= 1")
    if (0, 0) not in n.offsets:
        raise EngineError("lifting requires the origin offset")
    if not (a.neighborhood.offsets <= geometry.power(n, p).offsets):
        raise EngineError("automaton neighborhood not inside the p-th power")
    return LiftedAutomaton(a, n, p)


class LiftedAutomaton:
    def __init__(self, base: Automaton, n: Neighborhood, p: int):
        self.base = base
        self.p = p
        order = n.sorted_offsets
        base_order = base.offsets_order
        q0 = base.quiescent
        i_center = order.index((0, 0))

        def rule(window: tuple) -> State:
            center = window[i_center]
            if center == BOT and all(w == BOT for w in window):
                return BOT
            # Adopt the common phase of the active neighbors.
            phases = {w[0] for w in window if w != BOT}
            if len(phases) != 1:
                raise EngineError("lifted cells out of phase")
            phase = next(iter(phases))
            merged: dict[Cell, State] = {}
            for (vx, vy), w in zip(order, window):
                if w == BOT:
                    continue
                for (ux, uy), s in w[1]:
                    merged.setdefault((ux + vx, uy + vy), s)
            if center == BOT:
                merged.setdefault((0, 0), q0)
            if phase + 1 < p:
                return (phase + 1, tuple(sorted(merged.items())))
            nxt = base.rule(tuple(merged.get(o, q0) for o in base_order))
            return (0, (((0, 0), nxt),))

        self.automaton = Automaton(
            states=frozenset([BOT]),  # record states are unbounded-universe; not enumerated
            neighborhood=n,
            rule=rule,
            quiescent=BOT,
            name=f"lift[{base.name or 'a'}^{p}]",
        )

    def initial(self, c: Configuration, pad: int) -> Configuration:
        """Materialize an active region `pad` cells beyond the support."""
        cells = {}
        for (x, y) in _padded_box(c.support() or {(0, 0)}, pad):
            cells[(x, y)] = (0, (((0, 0), c[(x, y)]),))
        return Configuration(BOT, cells)

    def project(self, c: Configuration) -> Configuration:
        q0 = self.base.quiescent
        out = {}
        for cell, s in c.cells.items():
            if s == BOT:
                continue
            val = dict(s[1]).get((0, 0), q0)
            if val != q0:
                out[cell] = val
        return Configuration(q0, out)


def _padded_box(cells: Iterable[Cell], pad: int) -> list[Cell]:
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    return [(x, y)
            for x in range(min(xs) - pad, max(xs) + pad + 1)
            for y in range(min(ys) - pad, max(ys) + pad + 1)]


# ---------------------------------------------------------------------------
# Built-in automata

BUILTIN_QUIESCENT = "_"
ACCEPT = "ACC"
REJECT = "REJ"


def _all_a_rule_factory(order: tuple[Cell, ...], period: int) -> Callable[[tuple], State]:
    """Uniform-word recognizer: accepts iff every symbol is `a`.

    Each input cell keeps (symbol, ok, done[, phase]): `ok` is the AND of
    its own symbol test with the up/right neighbors' flags, so after d
    steps it covers the dominated rectangle at distance d; `done` rides
    one step behind, fed from the border, and triggers the verdict.  With
    period > 1 the waves only move on the last phase, stretching the
    decision time by that factor.
    """
    i_center = order.index((0, 0))
    i_up = order.index((0, 1))
    i_right = order.index((1, 0))

    def view(s: State) -> tuple[bool, bool]:
        # (ok, done) as seen by a neighbor below/left of s.
        if s == BUILTIN_QUIESCENT:
            return True, True
        if s == ACCEPT:
            return True, True
        if s == REJECT:
            return False, True
        if isinstance(s, tuple):
            return s[1], s[2]
        return s == "a", False

    def normalize(s: State):
        if isinstance(s, tuple):
            return s
        return (s, s == "a", False) + ((0,) if period > 1 else ())

    def rule(window: tuple) -> State:
        c = window[i_center]
        if c == BUILTIN_QUIESCENT or c == ACCEPT or c == REJECT:
            return c
        me = normalize(c)
        sym, ok, done = me[0], me[1], me[2]
        phase = me[3] if period > 1 else period - 1
        if phase != period - 1:
            return (sym, ok, done, phase + 1)
        if done:
            return ACCEPT if ok else REJECT
        up_ok, up_done = view(window[i_up])
        right_ok, right_done = view(window[i_right])
        ok2 = ok and up_ok and right_ok
        done2 = up_done and right_done
        if period > 1:
            return (sym, ok2, done2, 0)
        return (sym, ok2, done2)

    return memoized_rule(rule)


def _build_all_a(n: Neighborhood, period: int, name: str) -> Automaton:
    needed = {(0, 0), (0, 1), (1, 0)}
    if not needed <= n.offsets:
        raise EngineError("all_a needs the origin, up and right offsets")
    order = n.sorted_offsets
    states = {BUILTIN_QUIESCENT, ACCEPT, REJECT, "a", "b"}
    for sym in ("a", "b"):
        for ok in (False, True):
            for done in (False, True):
                if period > 1:
                    for ph in range(period):
                        states.add((sym, ok, done, ph))
                else:
                    states.add((sym, ok, done))
    return Automaton(
        states=frozenset(states),
        neighborhood=n,
        rule=_all_a_rule_factory(order, period),
        quiescent=BUILTIN_QUIESCENT,
        accepting=ACCEPT,
        rejecting=REJECT,
        name=name,
    )


def _build_shift(n: Neighborhood, dx: int, dy: int, name: str) -> Automaton:
    if (dx, dy) not in n.offsets:
        raise EngineError(f"shift offset ({dx},{dy}) not in the neighborhood")
    order = n.sorted_offsets
    idx = order.index((dx, dy))

    def rule(window: tuple) -> State:
        return window[idx]

    states = frozenset([BUILTIN_QUIESCENT, "a", "b"])
    return Automaton(states=states, neighborhood=n, rule=rule,
                     quiescent=BUILTIN_QUIESCENT, name=name)


def builtin_automaton(name: str, n: Neighborhood, params: tuple[str, ...] = ()) -> Automaton:
    if name == "all_a":
        return _build_all_a(n, period=1, name=name)
    if name == "all_a_slow3":
        return _build_all_a(n, period=3, name=name)
    if name == "shift":
        if len(params) != 2:
            raise EngineError("builtin shift needs `dx dy` parameters")
        return _build_shift(n, int(params[0]), int(params[1]), name=name)
    raise EngineError(f"unknown builtin automaton {name!r}")


BUILTIN_NAMES = ("all_a", "all_a_slow3", "shift")


# ---------------------------------------------------------------------------
# Automaton text format


def parse_automaton(text: str,
                    neighborhood_loader: Callable[[str], tuple[Cell, ...]]) -> Automaton:
    """Header lines (states/neighborhood/quiescent/accepting/rejecting), then
    either `rule: table` followed by `<states...> -> <state>` lines in the
    neighborhood file's offset order, or `rule: builtin <name> [params]`.

    The loader maps the `neighborhood:` header value to the file's offset
    tuple in declaration order (table keys follow that order).
    """
    headers: dict[str, str] = {}
    lines = text.splitlines()
    i = 0
    rule_kind = None
    for i, raw in enumerate(lines):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"expected `key: value`, got {raw!r}", i + 1)
        key, value = (part.strip() for part in line.split(":", 1))
        if key == "rule":
            rule_kind = value
            break
        headers[key] = value
    if rule_kind is None:
        raise ParseError("missing `rule:` line")
    for required in ("states", "neighborhood", "quiescent"):
        if required not in headers:
            raise ParseError(f"missing `{required}:` header")

    order = tuple(neighborhood_loader(headers["neighborhood"]))
    n = Neighborhood(frozenset(order))
    states = frozenset(headers["states"].split())
    quiescent = headers["quiescent"]
    accepting = headers.get("accepting") or None
    rejecting = headers.get("rejecting") or None

    if rule_kind.startswith("builtin"):
        parts = rule_kind.split()
        if len(parts) < 2:
            raise ParseError("`rule: builtin` needs a name", i + 1)
        return builtin_automaton(parts[1], n, tuple(parts[2:]))

    if rule_kind != "table":
        raise ParseError(f"unknown rule kind {rule_kind!r}", i + 1)
    table: dict[tuple, State] = {}
    for j, raw in enumerate(lines[i + 1:], start=i + 2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise ParseError(f"expected `<states> -> <state>`, got {raw!r}", j)
        lhs, rhs = line.split("->", 1)
        key = tuple(lhs.split())
        out = rhs.strip()
        if len(key) != len(order):
            raise ParseError(f"expected {len(order)} neighbor states, got {len(key)}", j)
        unknown = [s for s in key + (out,) if s not in states]
        if unknown:
            raise ParseError(f"unknown states {unknown}", j)
        table[key] = out
    return Automaton(states=states, neighborhood=n, rule=TableRule(table),
                     quiescent=quiescent, accepting=accepting, rejecting=rejecting,
                     offsets_order=order, name="table")
