"""Composition of the accelerated recognizer.

For a recognizer deciding at real time plus slack f, the composed machine
decides within ceil((1+eps)*RT + eps*f) plus a constant: the input is
compressed by a factor k > 1/eps along every sampled direction in
parallel, compression completion activates (asynchronously, per cell) a
grouped simulator advancing k base steps per step, and the origin takes
the first decision any pipeline produces.  Inputs at or below the
fallback cutoff are decided in real time from a gathered-input table.

Wall-clock accounting uses the activation wrapper's advancement law: a
cell reaches simulated time s at wall time s + max over the cells within
s reachability steps of their activation times.  The law is exactly the
wrapper's readiness recursion unrolled, and the explicit composed runner
(`explicit_pipeline_time`) is kept alongside so tests can confirm the
two agree.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from . import compression, engine, geometry, grouping, sync
from .compression import CompressionLayer, CompressionRun
from .engine import Automaton, Picture, RecognitionProfile
from .errors import CaccelError
from .geometry import Cell, DirectionPlan, Neighborhood


class AccelError(CaccelError):
    pass


def choose_parameters(n: Neighborhood, epsilon: Fraction) -> tuple[int, int, int, DirectionPlan]:
    """(k, alpha, tau, directions) for a target slowdown fraction epsilon."""
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise AccelError("epsilon must be positive")
    geometry.require_complete(n)
    inv = 1 / epsilon
    k = max(inv.numerator // inv.denominator + 1, geometry.k0_min(n))
    n1 = n.with_origin()
    alpha = geometry.alpha_group(n1, k)
    tau = geometry.tau_sync(n1)
    plan = geometry.direction_set(n, epsilon)
    return k, alpha, tau, plan


def convexify_wrapper(a: Automaton) -> Automaton:
    """Equivalent recognizer on the convexified neighborhood.

    The hull's extra offsets are read but ignored, so every run is
    step-for-step identical to the original machine's.
    """
    n_cvx = geometry.convexify(a.neighborhood)
    if n_cvx.offsets == a.neighborhood.offsets:
        return a
    order = n_cvx.sorted_offsets
    indices = tuple(order.index(v) for v in a.offsets_order)
    base_rule = a.rule

    def rule(window: tuple) -> engine.State:
        return base_rule(tuple(window[i] for i in indices))

    return Automaton(states=a.states, neighborhood=n_cvx, rule=rule,
                     quiescent=a.quiescent, accepting=a.accepting,
                     rejecting=a.rejecting, name=f"convex[{a.name or 'a'}]")


class FallbackDecider:
    """Real-time decider for small inputs: the origin gathers the whole
    picture within real time and reads the decision off a table.

    The table is keyed by picture content and filled by running the base
    recognizer; only the finitely many pictures at or below the cutoff
    can ever be consulted."""

    def __init__(self, base: Automaton, cutoff: int):
        if cutoff < 1:
            raise AccelError("cutoff must be >= 1")
        self.base = base
        self.cutoff = cutoff
        self.table: dict = {}
        self.lookups = 0

    def covers(self, p: Picture) -> bool:
        return p.width <= self.cutoff and p.height <= self.cutoff

    def decide(self, p: Picture) -> tuple[str, int]:
        """(verdict, decision time) with time = real time + gather constant."""
        if not self.covers(p):
            raise AccelError("picture above the fallback cutoff")
        self.lookups += 1
        key = (p.width, p.height, tuple(p.to_rows()))
        verdict = self.table.get(key)
        if verdict is None:
            res = engine.recognize(self.base, p)
            if res.outcome == "undecided":
                raise AccelError("base recognizer undecided on a fallback input")
            verdict = res.outcome
            self.table[key] = verdict
        return verdict, geometry.real_time(self.base.neighborhood, p.width, p.height) + 2


def small_input_fallback(a: Automaton, cutoff: int) -> FallbackDecider:
    return FallbackDecider(a, cutoff)


def time_bound(n: int, m: int, epsilon: Fraction, profile: RecognitionProfile) -> int:
    """ceil((1+eps)*rt + eps*slack) for an n-by-m input."""
    epsilon = Fraction(epsilon)
    return math.ceil((1 + epsilon) * profile.rt(n, m) + epsilon * profile.slack(n, m))


@dataclass(frozen=True)
class AccelDecision:
    verdict: str
    time: int
    route: str                       # "fallback" | "pipeline"
    layer_times: tuple[int, ...] = ()
    best_layer: int | None = None


@dataclass
class AcceleratedRecognizer:
    base: Automaton
    epsilon: Fraction
    k: int
    alpha: int
    tau: int
    plan: DirectionPlan
    layers: tuple[CompressionLayer, ...]
    grouped: grouping.GroupedAutomaton
    fallback: FallbackDecider
    convex_base: Automaton

    def decide(self, p: Picture) -> AccelDecision:
        if self.fallback.covers(p):
            verdict, t = self.fallback.decide(p)
            return AccelDecision(verdict=verdict, time=t, route="fallback")
        runs = [compression.run_compression(layer, p) for layer in self.layers]
        packed0 = runs[0].final
        for other in runs[1:]:
            if other.final != packed0:
                raise AccelError("layers disagree on the packed content")
        verdict, s_star = self._grouped_decision_steps(packed0, p.width, p.height)
        avail = self._packed_arrivals(p.width, p.height)
        times = []
        for run in runs:
            worst = 0
            for cell, t_act in run.completion.items():
                if avail.get(cell, 10 ** 9) <= s_star:
                    worst = max(worst, t_act)
            times.append(s_star + worst)
        best = min(range(len(times)), key=lambda i: (times[i], i))
        return AccelDecision(verdict=verdict, time=times[best], route="pipeline",
                             layer_times=tuple(times), best_layer=best)

    # -- helpers --------------------------------------------------------------

    def _guard(self, n: int, m: int) -> int:
        return 4 * geometry.real_time(self.convex_base.neighborhood, n, m) + 64

    def _grouped_decision_steps(self, packed, width: int, height: int) -> tuple[str, int]:
        """Synchronous grouped run: wrapped steps until the origin's projected
        base state commits."""
        ga = self.grouped
        config = ga.initial_configuration(packed, width, height)
        acc, rej = self.base.accepting, self.base.rejecting
        guard = ga.gather_steps + (self._guard(width, height) // self.k) + self.tau + 16
        for s in range(guard + 1):
            state = config[(0, 0)]
            if state[0] == "s":
                origin = ga.origin_base_state(state)
                if origin == acc:
                    return "accepted", s
                if origin == rej:
                    return "rejected", s
            config = ga.step(config)
        raise AccelError("grouped run hit the guard without a decision")

    def _packed_arrivals(self, width: int, height: int) -> dict[Cell, int]:
        """min j with the cell in the j-th power of the neighborhood, over the
        packed support (BFS from the origin with a generous padded box)."""
        n = self.grouped.neighborhood
        support = self.grouped.support_cells(width, height)
        xs = [c[0] for c in support]
        ys = [c[1] for c in support]
        pad = n.max_magnitude * (2 * (max(xs) - min(xs) + max(ys) - min(ys)) + 8)
        lo = (min(xs) - pad, min(ys) - pad)
        hi = (max(xs) + pad, max(ys) + pad)
        dist: dict[Cell, int] = {(0, 0): 0}
        queue: deque[Cell] = deque([(0, 0)])
        offsets = tuple(n.offsets)
        while queue:
            cx, cy = queue.popleft()
            d1 = dist[(cx, cy)] + 1
            for ox, oy in offsets:
                nxt = (cx + ox, cy + oy)
                if nxt in dist or not (lo[0] <= nxt[0] <= hi[0] and lo[1] <= nxt[1] <= hi[1]):
                    continue
                dist[nxt] = d1
                queue.append(nxt)
        return {c: dist[c] for c in support if c in dist}

    def explicit_pipeline_time(self, p: Picture, layer_index: int,
                               horizon: int | None = None) -> tuple[str, int]:
        """Run one pipeline as the literal composed machine: the activation
        wrapper around the grouped automaton, activations at the layer's
        per-cell compression completion times.  Used to validate the
        closed-form accounting in decide()."""
        layer = self.layers[layer_index]
        run = compression.run_compression(layer, p)
        ga = self.grouped
        wrapped = sync.SyncWrapped(ga.automaton, self.tau)
        support = set(ga.support_cells(p.width, p.height))
        activation: dict[Cell, int] = {c: 0 for c in support}
        activation.update(run.completion)
        payloads: dict[Cell, engine.State] = {
            c: ga.payload_state(run.final.get(c)) for c in support}

        walls = horizon if horizon is not None else self._guard(p.width, p.height)
        reach = ga.neighborhood.max_magnitude
        pad = reach * (walls + self.tau + 2)
        xs = [c[0] for c in support]
        ys = [c[1] for c in support]
        domain = [(x, y)
                  for x in range(min(xs) - pad, max(xs) + pad + 1)
                  for y in range(min(ys) - pad, max(ys) + pad + 1)]
        qv_payload = ga.payload_state(None)
        states: dict[Cell, engine.State] = {}
        rule = wrapped.automaton.rule
        order = wrapped.automaton.offsets_order
        acc, rej = self.base.accepting, self.base.rejecting
        for wall in range(walls + 1):
            for c in domain:
                if states.get(c) is sync.INACTIVE or c not in states:
                    due = activation.get(c, 0)
                    if due == wall:
                        states[c] = wrapped.activation_state(payloads.get(c, qv_payload))
            origin = states.get((0, 0))
            if origin is not None and origin is not sync.INACTIVE:
                g_state = wrapped.projection(origin)
                if g_state[0] == "s":
                    base_state = ga.origin_base_state(g_state)
                    if base_state == acc:
                        return "accepted", wall
                    if base_state == rej:
                        return "rejected", wall
            get = states.get
            new_states = {}
            for c in domain:
                me = get(c)
                if me is None:
                    continue
                window = tuple(get((c[0] + ox, c[1] + oy)) for ox, oy in order)
                out = rule(window)
                new_states[c] = out
            states = new_states
        raise AccelError("explicit pipeline hit the guard without a decision")


def build_accelerated(a: Automaton, epsilon: Fraction, cutoff: int = 6) -> AcceleratedRecognizer:
    """Assemble the full construction for a recognizer and a target epsilon."""
    epsilon = Fraction(epsilon)
    if not a.is_recognizer:
        raise AccelError("automaton has no accepting/rejecting states")
    geometry.require_complete(a.neighborhood)
    convex_base = convexify_wrapper(a)
    n = convex_base.neighborhood
    k, _, tau, plan = choose_parameters(n, epsilon)
    layers = tuple(compression.build_layer(n, k, c) for c in plan.positive_corners())
    if not layers:
        raise AccelError("no usable compression directions")
    grouped = grouping.build_grouped(convex_base, k)
    fallback = small_input_fallback(a, cutoff)
    return AcceleratedRecognizer(
        base=a, epsilon=epsilon, k=k, alpha=grouped.alpha, tau=tau, plan=plan,
        layers=layers, grouped=grouped, fallback=fallback, convex_base=convex_base)


# ---------------------------------------------------------------------------
# Measurement and reporting


def measure_decision_time(a: Automaton, p: Picture) -> tuple[str, int]:
    res = engine.recognize(a, p)
    if res.outcome == "undecided":
        raise AccelError("recognizer undecided within the deadline")
    return res.outcome, res.time


def measured_profile(a: Automaton, sizes: list[tuple[int, int]],
                     sample: Callable[[int, int], Picture]) -> RecognitionProfile:
    """Empirical slack: decision time minus real time on sampled inputs."""
    n = a.neighborhood
    slack: dict[tuple[int, int], int] = {}
    for (w, h) in sizes:
        _, t = measure_decision_time(a, sample(w, h))
        slack[(w, h)] = t - geometry.real_time(n, w, h)
    return RecognitionProfile(
        rt=lambda w, h: geometry.real_time(n, w, h),
        slack=lambda w, h: slack[(w, h)])


def report_line(n: int, m: int, base_time: int, accel_time: int, bound: int,
                agree: bool) -> str:
    return (f"{n} {m} {base_time} {accel_time} {bound} "
            f"{accel_time - bound} {'ok' if agree else 'MISMATCH'}")


def comparison_report(a: Automaton, accel: AcceleratedRecognizer,
                      pictures: list[Picture], profile: RecognitionProfile) -> str:
    """One line per input: `n m base_time accel_time bound residual agreement`."""
    lines = []
    for p in pictures:
        base_verdict, base_t = measure_decision_time(a, p)
        d = accel.decide(p)
        bound = time_bound(p.width, p.height, accel.epsilon, profile)
        lines.append(report_line(p.width, p.height, base_t, d.time, bound,
                                 base_verdict == d.verdict))
    return "\n".join(lines) + "\n"
