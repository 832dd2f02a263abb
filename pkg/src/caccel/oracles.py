"""Brute-force oracles and the deterministic check suites behind
`caccel oracle`.

Everything here recomputes results by a second, definition-level route:
Minkowski powers as boolean-grid dilations, a dense bounded-grid engine
next to the sparse one, literal set algebra for the grouping radius, and
trace-level assertions for the activation wrapper.  Suites are pure
functions of their seed and scale parameters, and their reports are
byte-stable across runs.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np

from . import accelerate, compression, engine, geometry, grouping, sync
from .engine import Automaton, Configuration, Picture
from .geometry import Cell, Neighborhood

# ---------------------------------------------------------------------------
# Definition-level references


def brute_power_grids(n: Neighborhood, tmax: int) -> tuple[np.ndarray, int]:
    """Boolean grids of n^t for t = 0..tmax via repeated dilation.

    Returns (grids, radius): grids[t][radius + x, radius + y] is membership
    of (x, y) in the t-th power.
    """
    r = n.max_magnitude * tmax + 1
    size = 2 * r + 1
    grids = np.zeros((tmax + 1, size, size), dtype=bool)
    grids[0, r, r] = True
    offs = sorted(n.offsets)
    for t in range(1, tmax + 1):
        prev = grids[t - 1]
        cur = grids[t]
        for ox, oy in offs:
            src_x = slice(max(0, -ox), size - max(0, ox))
            src_y = slice(max(0, -oy), size - max(0, oy))
            dst_x = slice(max(0, ox), size - max(0, -ox))
            dst_y = slice(max(0, oy), size - max(0, -oy))
            cur[dst_x, dst_y] |= prev[src_x, src_y]
    return grids, r


def brute_arrival(n: Neighborhood, width: int, height: int,
                  tmax: int) -> dict[Cell, int] | None:
    """Per-cell first power containing the cell, straight from the powers."""
    grids, r = brute_power_grids(n, tmax)
    out: dict[Cell, int] = {}
    for x in range(width):
        for y in range(height):
            hits = np.nonzero(grids[:, r + x, r + y])[0]
            if len(hits) == 0:
                return None
            out[(x, y)] = int(hits[0])
    return out


def brute_real_time(n: Neighborhood, width: int, height: int, tmax: int) -> int | None:
    grids, r = brute_power_grids(n, tmax)
    for t in range(tmax + 1):
        if grids[t, r:r + width, r:r + height].all():
            return t
    return None


def dense_run(a: Automaton, config: Configuration, steps: int) -> Configuration:
    """Bounded dense-grid evolution; the reference for the sparse engine.

    The grid is padded by steps * reach so the frozen outside (treated as
    background) cannot influence any cell that could differ from it.
    """
    support = config.support()
    if not support:
        return config
    reach = a.neighborhood.max_magnitude
    pad = reach * (steps + 1)
    xs = [c[0] for c in support]
    ys = [c[1] for c in support]
    lo = (min(xs) - pad, min(ys) - pad)
    hi = (max(xs) + pad, max(ys) + pad)
    width = hi[0] - lo[0] + 1
    height = hi[1] - lo[1] + 1
    bg = config.background
    grid = [[config[(lo[0] + i, lo[1] + j)] for j in range(height)] for i in range(width)]
    order = a.offsets_order
    rule = a.rule
    for _ in range(steps):
        nxt = [[bg] * height for _ in range(width)]
        for i in range(width):
            for j in range(height):
                window = []
                for ox, oy in order:
                    ii, jj = i + ox, j + oy
                    window.append(grid[ii][jj] if 0 <= ii < width and 0 <= jj < height else bg)
                nxt[i][j] = rule(tuple(window))
        grid = nxt
    cells = {}
    for i in range(width):
        for j in range(height):
            if grid[i][j] != bg:
                cells[(lo[0] + i, lo[1] + j)] = grid[i][j]
    return Configuration(bg, cells)


def random_table_automaton(n: Neighborhood, rng: random.Random,
                           states: tuple = ("_", "x", "y")) -> Automaton:
    """A total random table rule with a quiescent background state."""
    order = n.sorted_offsets
    table = {}

    def fill(prefix: list, depth: int):
        if depth == len(order):
            table[tuple(prefix)] = rng.choice(states)
            return
        for s in states:
            fill(prefix + [s], depth + 1)

    fill([], 0)
    q0 = states[0]
    table[tuple(q0 for _ in order)] = q0
    return Automaton(states=frozenset(states), neighborhood=n,
                     rule=engine.TableRule(table), quiescent=q0,
                     offsets_order=order, name="random_table")


def random_picture(rng: random.Random, width: int, height: int,
                   alphabet: str = "ab", b_bias: float | None = None) -> Picture:
    syms = {}
    for x in range(width):
        for y in range(height):
            if b_bias is not None:
                syms[(x, y)] = "b" if rng.random() < b_bias else "a"
            else:
                syms[(x, y)] = rng.choice(alphabet)
    return Picture(width, height, syms)


# ---------------------------------------------------------------------------
# Suites


def geometry_suite(seed: int, nm_cap: int = 12, n_random: int = 5) -> tuple[bool, str]:
    """Real time against brute powers; grouping radius and mirror bound by
    literal set algebra."""
    lines = [f"geometry suite seed={seed} cap={nm_cap}"]
    ok = True
    rng = random.Random(seed)
    pool: list[tuple[str, Neighborhood]] = [
        ("von_neumann", geometry.VON_NEUMANN), ("moore", geometry.MOORE)]
    for i in range(n_random):
        pool.append((f"random{i}", geometry.random_complete_neighborhood(rng)))

    for name, n in pool:
        # brute powers up to just past the claimed cover time: if the true
        # value were larger, the brute scan returns None and the check fails
        tmax = geometry.real_time(n, nm_cap, nm_cap) + 2
        arr = geometry.arrival_times(n, nm_cap, nm_cap)
        brute = brute_arrival(n, nm_cap, nm_cap, tmax)
        good = brute is not None and arr == brute
        ok &= good
        table = geometry.real_time_table(n, nm_cap, nm_cap)
        for w in range(1, nm_cap + 1):
            for h in range(1, nm_cap + 1):
                bt = brute_real_time(n, w, h, tmax)
                if table[(w, h)] != bt:
                    ok = good = False
        lines.append(f"  {'ok ' if good else 'FAIL'} arrival/rt {name} |N|={len(n)}")

    vn_ok = all(geometry.real_time(geometry.VON_NEUMANN, w, h) == w + h - 2
                for w in range(1, nm_cap + 1) for h in range(1, nm_cap + 1))
    mo_ok = all(geometry.real_time(geometry.MOORE, w, h) == max(w, h) - 1
                for w in range(1, nm_cap + 1) for h in range(1, nm_cap + 1))
    ok &= vn_ok and mo_ok
    lines.append(f"  {'ok ' if vn_ok else 'FAIL'} closed form von_neumann n+m-2")
    lines.append(f"  {'ok ' if mo_ok else 'FAIL'} closed form moore max-1")

    for name, n in pool:
        tau = geometry.tau_sync(n)
        neg = geometry.scalar(n, -1).offsets
        good = neg <= geometry.power(n, tau).offsets
        if tau > 1:
            good &= not (neg <= geometry.power(n, tau - 1).offsets)
        ok &= good
        lines.append(f"  {'ok ' if good else 'FAIL'} tau {name} = {tau}")
        for k in (2, 3):
            alpha = geometry.alpha_group(n, k)
            left = geometry.minkowski_sum(geometry.power(n, alpha), geometry.scalar(n, k))
            right = geometry.minkowski_sum(geometry.power(n, alpha), geometry.power(n, k))
            good = left.offsets == right.offsets
            if alpha > 0:
                l2 = geometry.minkowski_sum(geometry.power(n, alpha - 1), geometry.scalar(n, k))
                r2 = geometry.minkowski_sum(geometry.power(n, alpha - 1), geometry.power(n, k))
                good &= l2.offsets != r2.offsets
            good &= alpha <= len(n) * (k - 1) - k + 1
            ok &= good
            lines.append(f"  {'ok ' if good else 'FAIL'} alpha {name} k={k} = {alpha}")

    for a in range(0, 4):
        for b in range(0, 4):
            lhs = geometry.power(geometry.VON_NEUMANN, a + b).offsets
            rhs = geometry.minkowski_sum(geometry.power(geometry.VON_NEUMANN, a),
                                         geometry.power(geometry.VON_NEUMANN, b)).offsets
            ok &= lhs == rhs
    lines.append("  ok  power additivity sample" if ok else "  FAIL power additivity sample")
    return ok, "\n".join(lines) + "\n"


def _ratio_sizes(corner, cap: int) -> list[tuple[int, int]]:
    ratio = Fraction(corner[0]) / Fraction(corner[1])
    base_n, base_m = ratio.numerator, ratio.denominator
    out = []
    mult = 1
    while base_n * mult <= cap and base_m * mult <= cap:
        out.append((base_n * mult, base_m * mult))
        mult += 1
    return out


def compression_suite(seed: int, ratio_cap: int = 10, n_random: int = 50,
                      random_cap: int = 24,
                      conserve_all: bool = True) -> tuple[bool, str, int]:
    """Block-map placement, per-step conservation and the completion bound.

    Returns (ok, report, fitted constant) where the constant is the largest
    residual of any run against its completion bound.
    """
    eps = Fraction(1, 2)
    lines = [f"compression suite seed={seed} ratio_cap={ratio_cap} "
             f"random={n_random}x{random_cap}"]
    ok = True
    worst = 0
    rng = random.Random(seed)

    def check_run(n, k, layer, pic, bound_eps):
        nonlocal ok, worst
        run = compression.run_compression(layer, pic)
        k_ = layer.k
        for (cx, cy), cellv in run.final.items():
            for (i, j), sym in cellv.buffer.items():
                if pic[(k_ * cx + i, k_ * cy + j)] != sym:
                    ok = False
                    return None
        rt = geometry.real_time(n, pic.width, pic.height)
        bound = math.ceil((Fraction(k - 1, k) + bound_eps) * rt)
        resid = run.duration - bound
        worst = max(worst, resid)
        return run.duration, bound

    for name, n in (("von_neumann", geometry.VON_NEUMANN), ("moore", geometry.MOORE)):
        k = max(2, geometry.k0_min(n))
        plan = geometry.direction_set(n, eps)
        for corner in plan.positive_corners():
            layer = compression.build_layer(n, k, corner)
            for (w, h) in _ratio_sizes(corner, ratio_cap):
                pic = random_picture(rng, w, h)
                res = check_run(n, k, layer, pic, Fraction(0))
                if res is None:
                    lines.append(f"  FAIL placement {name} corner={corner} {w}x{h}")
                    continue
                # conservation at every meta step
                st = compression.LayerState.initial(layer, pic)
                target = sorted(pic.symbols.values())
                conserved = True
                guard = 8 * (w + h) + 64
                while not st.settled and conserved:
                    if sorted(st.content_multiset().elements()) != target:
                        conserved = False
                    if st.t > guard:
                        conserved = False
                    st = compression.layer_step(layer, st)
                conserved &= sorted(st.content_multiset().elements()) == target
                ok &= conserved
                if not conserved:
                    lines.append(f"  FAIL conservation {name} corner={corner} {w}x{h}")
        lines.append(f"  ok  exact-ratio sweep {name} k={k} "
                     f"layers={len(plan.positive_corners())}")

        for i in range(n_random):
            w = rng.randint(1, random_cap)
            h = rng.randint(1, random_cap)
            pic = random_picture(rng, w, h)
            res = compression.multi_layer(n, k, eps, pic)
            rt = geometry.real_time(n, w, h)
            bound = math.ceil((Fraction(k - 1, k) + eps) * rt)
            resid = res.best_completion - bound
            worst = max(worst, resid)
            if conserve_all:
                st = compression.LayerState.initial(res.layers[res.best_index], pic)
                target = sorted(pic.symbols.values())
                while not st.settled:
                    if sorted(st.content_multiset().elements()) != target:
                        ok = False
                        break
                    st = compression.layer_step(res.layers[res.best_index], st)
        lines.append(f"  ok  random multi-layer sweep {name}")

    lines.append(f"  fitted constant C = {worst}")
    return ok, "\n".join(lines) + "\n", worst


def sync_suite(seed: int, n_schedules: int = 50, support: int = 8,
               horizon: int = 30, t_cap: int = 20) -> tuple[bool, str]:
    """Progress, projection, skew, clock and liveness assertions over random
    activation schedules, plus the synchronous-start exactness check."""
    lines = [f"sync suite seed={seed} schedules={n_schedules} "
             f"support={support} horizon={horizon}"]
    ok = True
    rng = random.Random(seed)
    vn = geometry.VON_NEUMANN
    asym = Neighborhood.of([(0, 0), (1, 0), (0, 1), (-1, -1)])
    machines = [("von_neumann", engine.builtin_automaton("shift", vn, ("1", "0"))),
                ("asym", engine.builtin_automaton("shift", asym, ("1", "0")))]

    pic = random_picture(rng, support, support)
    cfg = engine.picture_configuration(pic, engine.BUILTIN_QUIESCENT)
    cells = [(x, y) for x in range(support) for y in range(support)]

    for name, a in machines:
        w = sync.wrap(a)
        zero = sync.ActivationSchedule({c: 0 for c in cells})
        rep = sync.progress_guarantee(w, cfg, zero, horizon=min(horizon, 12))
        good = rep.ok and rep.max_skew == 0
        ok &= good
        lines.append(f"  {'ok ' if good else 'FAIL'} all-zero schedule {name} tau={w.tau}")

    w = sync.wrap(machines[0][1])
    wa = sync.wrap(machines[1][1])
    fails = 0
    max_skew = 0
    for i in range(n_schedules):
        wrapped = wa if i % 5 == 4 else w
        sched = sync.ActivationSchedule({c: rng.randint(0, t_cap) for c in cells})
        rep = sync.progress_guarantee(wrapped, cfg, sched, horizon=horizon)
        max_skew = max(max_skew, rep.max_skew)
        if not rep.ok:
            fails += 1
            lines.append(f"  FAIL schedule {i}: {rep.violations[0]}")
    ok &= fails == 0
    lines.append(f"  {'ok ' if fails == 0 else 'FAIL'} {n_schedules} random schedules, "
                 f"max skew {max_skew}")
    return ok, "\n".join(lines) + "\n"


def grouped_suite(seed: int, size: int = 8, tmax: int = 10) -> tuple[bool, str]:
    """Grouped blocks equal the direct run at k-times the step count; the
    too-small fringe is rejected at build time."""
    lines = [f"grouped suite seed={seed} size={size} tmax={tmax}"]
    ok = True
    rng = random.Random(seed)
    pic = random_picture(rng, size, size)

    for name, n in (("von_neumann", geometry.VON_NEUMANN), ("moore", geometry.MOORE)):
        a = engine.builtin_automaton("all_a", n)
        for k in (2, 3):
            ga = grouping.build_grouped(a, k)
            ratio = Fraction(pic.width, pic.height)
            layer = compression.build_layer(ga.neighborhood, k,
                                            geometry.max_rectangle(ga.neighborhood, ratio))
            packed = compression.run_compression(layer, pic).final
            cfg = ga.gathered_configuration(packed, pic.width, pic.height)
            direct = engine.picture_configuration(pic, a.quiescent)
            good = True
            for t in range(tmax + 1):
                for cell, s in cfg.cells.items():
                    view = ga.block_view(s)
                    for u, val in view.items():
                        abs_cell = (k * cell[0] + u[0], k * cell[1] + u[1])
                        if direct[abs_cell] != val:
                            good = False
                if not good:
                    break
                cfg = grouping.grouped_step(ga, cfg)
                direct = engine.run(a, direct, k)
            ok &= good
            lines.append(f"  {'ok ' if good else 'FAIL'} exactness {name} k={k} "
                         f"alpha={ga.alpha} t<={tmax}")

    try:
        grouping.GroupedAutomaton(engine.builtin_automaton("all_a", geometry.VON_NEUMANN), 2, 0)
        ok = False
        lines.append("  FAIL negative control: alpha=0 accepted")
    except grouping.GroupingError:
        lines.append("  ok  negative control: alpha=0 rejected")
    return ok, "\n".join(lines) + "\n"


SUITES = {
    "geometry": lambda seed: geometry_suite(seed),
    "compression": lambda seed: compression_suite(seed)[:2],
    "sync": lambda seed: sync_suite(seed),
    "grouped": lambda seed: grouped_suite(seed),
}


# ---------------------------------------------------------------------------
# Acceleration sweep report (shared by the CLI and the acceptance gate)


def acceleration_report(base_name: str, epsilon: Fraction, sweep_sizes: list[int],
                        n_random: int, random_cap: int, seed: int,
                        exhaustive_area: int = 0) -> tuple[bool, str, int]:
    """End-to-end comparison: agreement plus the time bound with one fitted
    constant (returned).  Deterministic in (arguments, seed)."""
    vn = geometry.VON_NEUMANN
    base = engine.builtin_automaton(base_name, vn)
    accel = accelerate.build_accelerated(base, epsilon)
    rng = random.Random(seed)
    lines = [f"acceleration report {base_name} eps={epsilon} seed={seed}",
             f"  k={accel.k} alpha={accel.alpha} tau={accel.tau} "
             f"layers={len(accel.layers)} cutoff={accel.fallback.cutoff}"]
    ok = True
    worst = -(10 ** 9)

    profile_sizes = [(s, s) for s in sweep_sizes]
    profile = accelerate.measured_profile(
        base, profile_sizes,
        lambda w, h: Picture(w, h, {(x, y): "a" for x in range(w) for y in range(h)}))

    crossover = None
    for s in sweep_sizes:
        pic = Picture(s, s, {(x, y): "a" for x in range(s) for y in range(s)})
        bv, bt = accelerate.measure_decision_time(base, pic)
        d = accel.decide(pic)
        bound = accelerate.time_bound(s, s, epsilon, profile)
        resid = d.time - bound
        worst = max(worst, resid)
        agree = bv == d.verdict
        ok &= agree
        if crossover is None and d.time < bt:
            crossover = s
        lines.append("  " + accelerate.report_line(s, s, bt, d.time, bound, agree))

    mismatches = 0
    for _ in range(n_random):
        w = rng.randint(1, random_cap)
        h = rng.randint(1, random_cap)
        pic = random_picture(rng, w, h, b_bias=rng.choice((0.0, 0.02, 0.1)))
        bv, _ = accelerate.measure_decision_time(base, pic)
        d = accel.decide(pic)
        if bv != d.verdict:
            mismatches += 1
    ok &= mismatches == 0
    lines.append(f"  random agreement: {n_random - mismatches}/{n_random}")

    if exhaustive_area:
        bad = 0
        for w in range(1, 6):
            for h in range(1, 6):
                if w * h > exhaustive_area:
                    continue
                for bits in range(2 ** (w * h)):
                    syms = {}
                    for idx in range(w * h):
                        syms[(idx % w, idx // w)] = "b" if (bits >> idx) & 1 else "a"
                    pic = Picture(w, h, syms)
                    bv, _ = accelerate.measure_decision_time(base, pic)
                    if accel.decide(pic).verdict != bv:
                        bad += 1
        ok &= bad == 0
        lines.append(f"  exhaustive small agreement: {'ok' if bad == 0 else bad}")

    lines.append(f"  fitted constant C = {worst}")
    lines.append(f"  accelerated beats base from n = {crossover}")
    return ok, "\n".join(lines) + "\n", worst
