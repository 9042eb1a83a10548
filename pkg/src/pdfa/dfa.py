"""Classical monotone framework with a worklist solver, and Live Variables."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

from .cfg import FlowGraph, flow, used_vars
from .errors import NonMonotoneError
from .lang import Assign, Random

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class MonotoneInstance:
    """A monotone framework over a finite powerset lattice."""

    universe: frozenset
    direction: str  # FORWARD | BACKWARD
    combine: str  # "union" (may) | "intersection" (must)
    extremal_value: frozenset
    transfer: Callable  # (label, frozenset) -> frozenset

    @property
    def bottom(self):
        return frozenset() if self.combine == "union" else self.universe

    def join(self, a, b):
        return a | b if self.combine == "union" else a & b

    def leq(self, a, b):
        return a <= b if self.combine == "union" else a >= b


@dataclass
class MonotoneSolution:
    direction: str
    circ: dict  # label -> value before the transfer function
    bullet: dict  # label -> value after it
    iterations: int = 0

    @property
    def entry(self):
        return self.circ if self.direction == FORWARD else self.bullet

    @property
    def exit(self):
        return self.bullet if self.direction == FORWARD else self.circ

    def to_dict(self) -> dict:
        return {str(l): {"entry": sorted(self.entry[l]), "exit": sorted(self.exit[l])}
                for l in sorted(self.circ)}


def check_monotone(inst: MonotoneInstance, labels):
    """Compare transfers on ordered pairs drawn from bottom, singletons, and top."""
    samples = [frozenset(), inst.universe] + [frozenset([v]) for v in sorted(inst.universe, key=str)]
    samples += [inst.universe - {v} for v in sorted(inst.universe, key=str)]
    for label in labels:
        images = [inst.transfer(label, x) for x in samples]
        for x, fx in zip(samples, images):
            for y, fy in zip(samples, images):
                if inst.leq(x, y) and not inst.leq(fx, fy):
                    raise NonMonotoneError(
                        f"transfer at label {label} is not monotone: "
                        f"{sorted(x, key=str)} -> {sorted(fx, key=str)} but "
                        f"{sorted(y, key=str)} -> {sorted(fy, key=str)}")


def solve_monotone(inst: MonotoneInstance, graph: FlowGraph, rng=None, check=True) -> MonotoneSolution:
    """Least solution by a FIFO worklist over the (possibly reversed) flow.

    Extremal labels start at the extremal value and still join what flows in
    from their predecessors. ``rng`` (a ``random.Random``) shuffles the
    initial worklist and every batch of re-queued edges. With ``check`` the
    transfers are first tested for monotonicity on sampled pairs; pairs met
    during solving are always compared too.
    """
    if check:
        check_monotone(inst, graph.blocks)
    if inst.direction == FORWARD:
        edges = [(e.src, e.dst) for e in graph.edges]
        extremal = {graph.init}
    else:
        edges = [(e.dst, e.src) for e in graph.edges]
        extremal = set(graph.finals)
    out_edges = {l: [] for l in graph.blocks}
    for src, dst in edges:
        out_edges[src].append((src, dst))

    analysis = {l: (inst.extremal_value if l in extremal else inst.bottom) for l in graph.blocks}
    seen_io = {}

    def apply(label):
        x = analysis[label]
        y = inst.transfer(label, x)
        prev = seen_io.get(label)
        if prev is not None and inst.leq(prev[0], x) and not inst.leq(prev[1], y):
            raise NonMonotoneError(
                f"transfer at label {label} is not monotone: "
                f"{sorted(prev[0])} -> {sorted(prev[1])} but {sorted(x)} -> {sorted(y)}")
        seen_io[label] = (x, y)
        return y

    work = list(edges)
    if rng is not None:
        rng.shuffle(work)
    queue = deque(work)
    queued = set(work)
    iterations = 0
    while queue:
        edge = queue.popleft()
        queued.discard(edge)
        src, dst = edge
        iterations += 1
        out = apply(src)
        if not inst.leq(out, analysis[dst]):
            analysis[dst] = inst.join(analysis[dst], out)
            fresh = [e for e in out_edges[dst] if e not in queued]
            if rng is not None:
                rng.shuffle(fresh)
            queue.extend(fresh)
            queued.update(fresh)

    bullet = {l: apply(l) for l in graph.blocks}
    return MonotoneSolution(inst.direction, dict(analysis), bullet, iterations)


# --------------------------------------------------------------------------
# Live Variables


def kill_lv(block) -> frozenset:
    if isinstance(block, (Assign, Random)):
        return frozenset([block.var])
    return frozenset()


def gen_lv(block) -> frozenset:
    # Random assignments read nothing; tests read FV(b).
    return used_vars(block)


def lv_instance(graph: FlowGraph, variables) -> MonotoneInstance:
    def transfer(label, live):
        block = graph.blocks[label]
        return (live - kill_lv(block)) | gen_lv(block)

    return MonotoneInstance(frozenset(variables), BACKWARD, "union", frozenset(), transfer)


def solve_lv(program, rng=None) -> MonotoneSolution:
    """Live variables at the entry and exit of every label."""
    graph = flow(program.body)
    return solve_monotone(lv_instance(graph, program.var_names), graph, rng)
