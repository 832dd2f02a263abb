"""Grouped simulation: one step of the grouped machine advances a k-by-k
packed block by k base steps.

Each packed cell stores the base states of its block plus a fringe (the
alpha-th neighborhood power around it).  The fringe radius alpha is chosen
so that the blocks held by a cell's neighbors jointly cover everything k
base steps need; the set identity n^alpha + k*n = n^alpha + n^k is what
makes that coverage hold, and it is re-verified structurally every time a
machine is built.  Before steady operation, cells gather their fringe from
neighbor blocks in a few wrapped steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from operator import itemgetter
from typing import Mapping

from . import engine, geometry
from .compression import PackedCell, rho
from .engine import Automaton, Configuration, State
from .errors import CaccelError
from .geometry import Cell, Neighborhood


class GroupingError(CaccelError):
    pass


def _offsets_of(n: Neighborhood) -> frozenset[Cell]:
    return n.offsets


class GroupedAutomaton:
    """The block machine for a fixed base automaton, factor k and fringe alpha.

    States are ('g', level, values) while gathering and ('s', values) once
    steady; `values` lists base states over the level's shape in a fixed
    order, so the whole state space is finite with the shapes as bounds.
    """

    def __init__(self, base: Automaton, k: int, alpha: int):
        if k < 1:
            raise GroupingError("k must be >= 1")
        if alpha < 0:
            raise GroupingError("alpha must be >= 0")
        geometry.require_complete(base.neighborhood)
        self.base = base
        self.k = k
        self.alpha = alpha
        n = base.neighborhood.with_origin()
        self.neighborhood = n
        order = n.sorted_offsets
        self.order = order
        i_center = order.index((0, 0))
        q0 = base.quiescent

        core = sorted(rho((0, 0), k))
        fringe = geometry.power(n, alpha).offsets
        block = sorted({(cx + ax, cy + ay) for cx, cy in core for ax, ay in fringe})
        self.block = tuple(block)
        b_index = {u: i for i, u in enumerate(block)}

        # shapes for the k inner steps: level i still needs n^(alpha+k-i)
        shapes: list[tuple[Cell, ...]] = []
        for i in range(k + 1):
            fr = geometry.power(n, alpha + k - i).offsets
            shapes.append(tuple(sorted({(cx + ax, cy + ay)
                                        for cx, cy in core for ax, ay in fr})))
        if shapes[k] != self.block:
            raise GroupingError("shape bookkeeping is inconsistent")
        self.shapes = shapes

        # assembling the widest shape from neighbor blocks (coverage identity)
        assembly: list[tuple[int, int]] = []
        for u in shapes[0]:
            found = None
            for v_idx, (vx, vy) in enumerate(order):
                src = (u[0] - k * vx, u[1] - k * vy)
                j = b_index.get(src)
                if j is not None:
                    found = (v_idx, j)
                    break
            if found is None:
                raise GroupingError(
                    f"coverage violation: {u} not visible from any neighbor block "
                    f"(alpha={alpha} too small for k={k})")
            assembly.append(found)
        self.assembly = tuple(assembly)

        rows: list[tuple[tuple[int, ...], ...]] = []
        for i in range(1, k + 1):
            prev_index = {u: j for j, u in enumerate(shapes[i - 1])}
            level_rows = []
            for u in shapes[i]:
                level_rows.append(tuple(prev_index[(u[0] + wx, u[1] + wy)]
                                        for wx, wy in base.offsets_order))
            rows.append(tuple(level_rows))
        self.rows = tuple(rows)
        # itemgetter rows: C-speed window extraction for the inner base steps
        def _getter(row: tuple[int, ...]):
            if len(row) == 1:
                j = row[0]
                return lambda vals: (vals[j],)
            return itemgetter(*row)

        row_getters = tuple(tuple(_getter(row) for row in level) for level in rows)

        # gather levels: what a cell can hold after i wrapped steps
        levels: list[tuple[Cell, ...]] = [tuple(core)]
        gather_assembly: list[tuple[tuple[int, int], ...]] = []
        while set(levels[-1]) != set(block):
            prev = {u: j for j, u in enumerate(levels[-1])}
            nxt: list[Cell] = []
            asm: list[tuple[int, int]] = []
            for u in block:
                found = None
                for v_idx, (vx, vy) in enumerate(order):
                    j = prev.get((u[0] - k * vx, u[1] - k * vy))
                    if j is not None:
                        found = (v_idx, j)
                        break
                if found is not None:
                    nxt.append(u)
                    asm.append(found)
            if len(nxt) == len(levels[-1]):
                raise GroupingError(
                    f"gather stalled at {len(nxt)}/{len(block)} offsets "
                    f"(alpha={alpha}, k={k})")
            levels.append(tuple(nxt))
            gather_assembly.append(tuple(asm))
        self.gather_levels = tuple(levels)
        self.gather_assembly = tuple(gather_assembly)
        self.gather_steps = len(levels) - 1

        self.quiescent_state: State = ("s", (q0,) * len(block))
        QV = self.quiescent_state
        base_rule = base.rule
        g_steps = self.gather_steps
        asm0 = self.assembly
        gather_asm = self.gather_assembly

        def rule(window: tuple) -> State:
            me = window[i_center]
            if me == QV and all(w == QV for w in window):
                return QV
            if me[0] == "s":
                gathering = any(w[0] == "g" for w in window)
                if gathering:
                    if me == QV:
                        return QV  # inert background beside still-gathering cells
                    raise GroupingError("steady cell beside a gathering one")
                vals = [window[v_idx][1][b_idx2] for v_idx, b_idx2 in asm0]
                for level in row_getters:
                    vals = [base_rule(getter(vals)) for getter in level]
                return ("s", tuple(vals))
            level = me[1]
            target = level + 1
            out = []
            for v_idx, j in gather_asm[level]:
                w = window[v_idx]
                if w[0] == "s":
                    if w != QV:
                        raise GroupingError("gathering cell beside a steady one")
                    # background block: quiescent everywhere at any level
                    out.append(q0)
                    continue
                if w[1] != level:
                    raise GroupingError("gathering cells out of phase")
                out.append(w[2][j])
            if target == g_steps:
                return ("s", tuple(out))
            return ("g", target, tuple(out))

        self.automaton = Automaton(
            states=frozenset([QV]),  # record states; bounded by the shapes
            neighborhood=n,
            rule=rule,
            quiescent=QV,
            name=f"grouped[{base.name or 'a'}/k={k}]",
            window_dedup=True,
        )
        self._origin_index = b_index[(0, 0)]
        # Wait-free sanity: the coverage identity itself, as sets.
        left = geometry.minkowski_sum(geometry.power(n, alpha), geometry.scalar(n, k))
        right = geometry.power(n, alpha + k)
        if left.offsets != right.offsets:
            raise GroupingError("set identity n^a + k*n = n^(a+k) fails for this alpha")

    # --- states --------------------------------------------------------------

    def payload_state(self, packed: PackedCell | None) -> State:
        """Activation payload: the cell's own packed buffer, fringe ungathered."""
        q0 = self.base.quiescent
        buf = packed.buffer if packed is not None else {}
        core_vals = tuple(buf.get(u, q0) for u in self.gather_levels[0])
        if self.gather_steps == 0:
            values = tuple(buf.get(u, q0) for u in self.block)
            return ("s", values)
        return ("g", 0, core_vals)

    def block_view(self, state: State) -> dict[Cell, State]:
        if state[0] != "s":
            raise GroupingError("cell still gathering")
        return dict(zip(self.block, state[1]))

    def origin_base_state(self, state: State) -> State:
        if state[0] != "s":
            raise GroupingError("cell still gathering")
        return state[1][self._origin_index]

    def render_block(self, state: State) -> str:
        """Core block and fringe, printed separately."""
        view = self.block_view(state)
        k = self.k
        core_rows = []
        for j in range(k - 1, -1, -1):
            core_rows.append(" ".join(str(view[(i, j)]) for i in range(k)))
        fringe = sorted(u for u in self.block if not (0 <= u[0] < k and 0 <= u[1] < k))
        fringe_txt = ", ".join(f"{u}:{view[u]}" for u in fringe)
        return "core:\n" + "\n".join(core_rows) + "\nfringe: " + fringe_txt

    # --- runs ----------------------------------------------------------------

    def support_cells(self, width: int, height: int) -> list[Cell]:
        """Packed cells whose block can see the input rectangle."""
        k = self.k
        r = max(max(abs(u[0]), abs(u[1])) for u in self.block)
        lo_x, hi_x = -((r + k) // k) - 1, (width + r) // k + 1
        lo_y, hi_y = -((r + k) // k) - 1, (height + r) // k + 1
        out = []
        for cx in range(lo_x, hi_x + 1):
            for cy in range(lo_y, hi_y + 1):
                if any(0 <= k * cx + u[0] < width and 0 <= k * cy + u[1] < height
                       for u in self.block):
                    out.append((cx, cy))
        return out

    def initial_configuration(self, packed: Mapping[Cell, PackedCell],
                              width: int, height: int) -> Configuration:
        cells = {}
        for cell in self.support_cells(width, height):
            cells[cell] = self.payload_state(packed.get(cell))
        return Configuration(self.quiescent_state, cells)

    def gathered_configuration(self, packed: Mapping[Cell, PackedCell],
                               width: int, height: int) -> Configuration:
        config = self.initial_configuration(packed, width, height)
        for _ in range(self.gather_steps):
            config = engine.step(self.automaton, config)
        return config

    def step(self, config: Configuration) -> Configuration:
        return engine.step(self.automaton, config)


def build_grouped(a: Automaton, k: int, alpha_cap: int = 64) -> GroupedAutomaton:
    """Choose the smallest workable fringe radius and build the machine.

    Starts from the minimal radius satisfying the set identity; if the
    packed-lattice gather cannot reach the full fringe through in-block
    paths, the radius is raised (the identity is monotone, so correctness
    is preserved).
    """
    n = a.neighborhood.with_origin()
    alpha0 = geometry.alpha_group(n, k)
    last_err: Exception | None = None
    for alpha in range(alpha0, alpha0 + alpha_cap + 1):
        try:
            return GroupedAutomaton(a, k, alpha)
        except GroupingError as err:
            last_err = err
    raise GroupingError(f"no workable alpha in [{alpha0}, {alpha0 + alpha_cap}]: {last_err}")


def gather_phase(a: Automaton, k: int, packed: Mapping[Cell, PackedCell],
                 alpha: int, width: int, height: int) -> tuple[GroupedAutomaton, Configuration]:
    """Run the gather steps synchronously from a packed input."""
    ga = GroupedAutomaton(a, k, alpha)
    return ga, ga.gathered_configuration(packed, width, height)


def grouped_step(ga: GroupedAutomaton, config: Configuration) -> Configuration:
    """One steady step: every block advances k base steps."""
    for s in config.cells.values():
        if s[0] != "s":
            raise GroupingError("configuration still has gathering cells")
    return ga.step(config)
