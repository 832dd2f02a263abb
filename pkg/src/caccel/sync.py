"""Asynchronous-activation wrapper.

Cells start inactive and are activated externally, each with its own input
payload; an active cell advances its simulation by one step exactly when
every neighbor is active and at least as advanced.  Because the skew
between neighbors never exceeds the mirror bound tau, clocks modulo
2*tau+1 suffice to compare simulated times and a history of the last
tau+1 simulated states serves every read a neighbor can need.

The guarantee: once all cells are activated (wall time t0), a cell's
projection at wall t0+t is its simulated state at some time >= t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import engine, geometry
from .engine import Automaton, Configuration, State
from .errors import CaccelError, ParseError
from .geometry import Cell, Neighborhood

INACTIVE = None


class SyncError(CaccelError):
    pass


@dataclass(frozen=True)
class ActivationSchedule:
    """cell -> wall time of activation, over the finite support of the run."""

    times: Mapping[Cell, int]

    def __post_init__(self):
        if not self.times:
            raise SyncError("schedule must be nonempty")
        if any(t < 0 for t in self.times.values()):
            raise SyncError("activation times must be nonnegative")

    @property
    def t0(self) -> int:
        return max(self.times.values())

    def domain(self) -> frozenset[Cell]:
        return frozenset(self.times)


def parse_schedule(text: str) -> ActivationSchedule:
    """One `x y t` triple per line; `#` comments allowed."""
    times: dict[Cell, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected `x y t`, got {raw.strip()!r}", lineno)
        try:
            x, y, t = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise ParseError(f"expected integers, got {raw.strip()!r}", lineno)
        times[(x, y)] = t
    if not times:
        raise ParseError("empty schedule")
    return ActivationSchedule(times)


class SyncWrapped:
    """The wrapped machine: states are INACTIVE or (clock, history)."""

    def __init__(self, base: Automaton, tau: int):
        self.base = base
        self.tau = tau
        self.modulus = 2 * tau + 1
        n = base.neighborhood.with_origin()
        order = n.sorted_offsets
        i_center = order.index((0, 0))
        base_indices = tuple(order.index(v) for v in base.offsets_order)
        base_rule = base.rule
        tau_local, modulus = tau, self.modulus
        keep = tau + 1

        def rule(window: tuple) -> State:
            me = window[i_center]
            if me is INACTIVE:
                return INACTIVE
            clock, hist = me
            for w in window:
                if w is INACTIVE:
                    return me
                if (w[0] - clock) % modulus > tau_local:
                    return me  # that neighbor is behind us
            assembled = []
            for bi in base_indices:
                w = window[bi]
                rel = (w[0] - clock) % modulus
                h = w[1]
                idx = len(h) - 1 - rel
                if idx < 0:
                    raise SyncError("history too shallow for a neighbor read")
                assembled.append(h[idx])
            new = base_rule(tuple(assembled))
            hist2 = (hist + (new,))[-keep:]
            return ((clock + 1) % modulus, hist2)

        self.automaton = Automaton(
            states=frozenset([INACTIVE]),  # record states; not enumerated
            neighborhood=n,
            rule=rule,
            quiescent=INACTIVE,
            name=f"sync[{base.name or 'a'}]",
        )

    def activation_state(self, payload: State) -> State:
        return (0, (payload,))

    def projection(self, s: State) -> State | None:
        if s is INACTIVE:
            return None
        return s[1][-1]


def wrap(a: Automaton) -> SyncWrapped:
    """Wrap `a` so its cells may be activated asynchronously."""
    tau = geometry.tau_sync(a.neighborhood)
    return SyncWrapped(a, tau)


def sync_step(wrapped: SyncWrapped, config: Configuration,
              activations: Mapping[Cell, State]) -> Configuration:
    """Apply external activations, then one synchronous wrapped step."""
    if config.background is not INACTIVE:
        raise SyncError("wrapped configurations use the inactive background")
    cells = dict(config.cells)
    for cell, payload in activations.items():
        if cells.get(cell, INACTIVE) is not INACTIVE:
            raise SyncError(f"cell {cell} is already active")
        cells[cell] = wrapped.activation_state(payload)
    return engine.step(wrapped.automaton, Configuration(INACTIVE, cells))


# ---------------------------------------------------------------------------
# Guarantee checking


@dataclass
class SyncReport:
    tau: int
    t0: int
    horizon: int
    walls: int
    advances: int
    max_skew: int
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def render_sim_times(sims: Mapping[Cell, int], lo: Cell, hi: Cell) -> str:
    """Grid of simulated times, `.` for inactive cells; row hi.y first."""
    width = max(2, max((len(str(t)) for t in sims.values()), default=1) + 1)
    rows = []
    for y in range(hi[1], lo[1] - 1, -1):
        row = []
        for x in range(lo[0], hi[0] + 1):
            t = sims.get((x, y))
            row.append(("." if t is None else str(t)).rjust(width))
        rows.append("".join(row))
    return "\n".join(rows)


def progress_guarantee(wrapped: SyncWrapped, base_config: Configuration,
                       schedule: ActivationSchedule, horizon: int,
                       collect_traces: bool = False) -> SyncReport:
    """Run the wrapped machine under the schedule and check the guarantee.

    Cells outside the schedule's domain are activated at time 0 with the
    quiescent payload (the background is known from the start).  The run
    materializes a halo wide enough that the frozen boundary beyond it
    cannot influence any checked cell within the horizon.
    """
    if horizon < 0:
        raise SyncError("horizon must be nonnegative")
    base = wrapped.base
    if not base_config.support() <= schedule.domain():
        raise SyncError("schedule domain must cover the input support")
    tau, modulus = wrapped.tau, wrapped.modulus
    n = base.neighborhood.with_origin()
    offsets = n.sorted_offsets
    reach = n.max_magnitude
    t0 = schedule.t0
    walls = t0 + horizon

    dom = schedule.domain()
    xs = [c[0] for c in dom]
    ys = [c[1] for c in dom]
    pad = reach * (walls + tau + 2)
    lo = (min(xs) - pad, min(ys) - pad)
    hi = (max(xs) + pad, max(ys) + pad)
    width = hi[0] - lo[0] + 1
    height = hi[1] - lo[1] + 1

    def index(cell: Cell) -> int | None:
        x, y = cell[0] - lo[0], cell[1] - lo[1]
        if 0 <= x < width and 0 <= y < height:
            return x * height + y
        return None

    total = width * height
    cells = [(lo[0] + i // height, lo[1] + i % height) for i in range(total)]
    nbrs: list[list[int | None]] = []
    for cell in cells:
        nbrs.append([index((cell[0] + ox, cell[1] + oy)) for ox, oy in offsets])

    activation = [0] * total
    for cell, t in schedule.times.items():
        i = index(cell)
        assert i is not None
        activation[i] = t

    q0 = base.quiescent
    payloads = [base_config[c] for c in cells]
    sims: list[int] = [-1] * total          # -1 = inactive
    hist: list[list[State] | None] = [None] * total
    quiet: list[bool] = [False] * total     # history is all-quiescent
    base_rule = base.rule
    base_indices = tuple(offsets.index(v) for v in base.offsets_order)
    keep = tau + 1

    # reference run of the base automaton, for projection checks
    ref: list[Configuration] = [base_config]

    report = SyncReport(tau=tau, t0=t0, horizon=horizon, walls=walls,
                        advances=0, max_skew=0)
    checked = [index(c) for c in sorted(dom)]
    traces: list[dict[Cell, int]] = []

    for wall in range(walls + 1):
        for i in range(total):
            if sims[i] < 0 and activation[i] == wall:
                sims[i] = 0
                hist[i] = [payloads[i]]
                quiet[i] = payloads[i] == q0

        if collect_traces:
            traces.append({cells[i]: sims[i] for i in checked if sims[i] >= 0})

        # skew bound and clock/true-time agreement across checked edges
        for i in checked:
            if sims[i] < 0:
                continue
            for j in nbrs[i]:
                if j is not None and sims[j] >= 0:
                    skew = abs(sims[i] - sims[j])
                    report.max_skew = max(report.max_skew, skew)
                    if skew > tau:
                        report.violations.append(
                            f"wall {wall}: skew {skew} > tau between "
                            f"{cells[i]} and {cells[j]}")
                    ahead_true = sims[j] >= sims[i]
                    ahead_clock = (sims[j] - sims[i]) % modulus <= tau
                    if ahead_true != ahead_clock:
                        report.violations.append(
                            f"wall {wall}: clock readiness disagrees with "
                            f"true times between {cells[i]} and {cells[j]}")

        # progress and projection on the checked region
        t_rel = wall - t0
        max_sim = max(sims[i] for i in checked)
        while len(ref) <= max_sim:
            ref.append(engine.step(base, ref[-1]))
        for i in checked:
            s = sims[i]
            if activation[i] <= wall and s < 0:
                report.violations.append(f"cell {cells[i]} missed its activation")
            if t_rel >= 0 and s < t_rel:
                report.violations.append(
                    f"wall {wall}: cell {cells[i]} at simulated time {s} < {t_rel}")
            if s >= 0 and hist[i][-1] != ref[s][cells[i]]:
                report.violations.append(
                    f"wall {wall}: projection mismatch at {cells[i]} (sim {s})")
        if report.violations or wall == walls:
            break

        advancing: list[int] = []
        advancing_mask = [False] * total
        for i in range(total):
            s = sims[i]
            if s < 0:
                continue
            ready = True
            for j in nbrs[i]:
                if j is None or sims[j] < s:
                    ready = False
                    break
            if ready:
                advancing.append(i)
                advancing_mask[i] = True
        # laggard liveness: strictly behind every neighbor implies advancing
        for i in checked:
            s = sims[i]
            if s < 0 or advancing_mask[i]:
                continue
            js = [j for j in nbrs[i] if j is not None]
            if js and all(sims[j] > s for j in js):
                report.violations.append(
                    f"wall {wall}: cell {cells[i]} strictly behind all neighbors but stalled")
        new_states: list[tuple[int, State, bool]] = []
        for i in advancing:
            s = sims[i]
            if quiet[i] and all(quiet[j] for j in nbrs[i] if j is not None):
                new_states.append((i, q0, True))
                continue
            assembled = []
            ok = True
            for bi in base_indices:
                j = nbrs[i][bi]
                assert j is not None
                h = hist[j]
                idx = len(h) - 1 - (sims[j] - s)
                if idx < 0:
                    report.violations.append(
                        f"wall {wall}: history underflow reading {cells[j]} from {cells[i]}")
                    ok = False
                    break
                # clock comparison must agree with true simulated times
                rel_clock = ((sims[j] - s) % modulus)
                if rel_clock > tau or rel_clock != sims[j] - s:
                    report.violations.append(
                        f"wall {wall}: clock arithmetic disagrees at {cells[i]}")
                assembled.append(h[idx])
            if not ok:
                continue
            out = base_rule(tuple(assembled))
            new_states.append((i, out, out == q0 and quiet[i]))
        for i, out, is_quiet in new_states:
            h = hist[i]
            h.append(out)
            if len(h) > keep:
                del h[0]
            sims[i] += 1
            quiet[i] = is_quiet
            report.advances += 1

    if collect_traces:
        report.traces = traces  # type: ignore[attr-defined]
    return report
