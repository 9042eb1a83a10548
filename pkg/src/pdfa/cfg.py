"""init / final / flow of labelled statements, with true-branch marking."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

from .lang import (Assign, If, Random, Seq, Skip, While, format_bexpr, format_block,
                   free_vars, iter_blocks)

UNCONDITIONAL = "unconditional"
TRUE = "true"
FALSE = "false"


@dataclass(frozen=True)
class Test:
    """The test ``[b]^l`` of an if or while statement, viewed as a block."""

    __test__ = False  # not a pytest class

    cond: object
    label: int
    loop: bool = False


def block_kind(block) -> str:
    if isinstance(block, Skip):
        return "skip"
    if isinstance(block, Assign):
        return "assign"
    if isinstance(block, Random):
        return "random"
    if isinstance(block, Test):
        return "test"
    raise TypeError(f"not a block: {block!r}")


def as_block(node):
    if isinstance(node, If):
        return Test(node.cond, node.label, loop=False)
    if isinstance(node, While):
        return Test(node.cond, node.label, loop=True)
    return node


def init(stmt) -> int:
    if isinstance(stmt, Seq):
        return init(stmt.first)
    return stmt.label


def final(stmt) -> frozenset:
    if isinstance(stmt, Seq):
        return final(stmt.second)
    if isinstance(stmt, If):
        return final(stmt.then) | final(stmt.orelse)
    return frozenset([stmt.label])


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    branch: str = UNCONDITIONAL


def flow_edges(stmt) -> set:
    if isinstance(stmt, (Skip, Assign, Random)):
        return set()
    if isinstance(stmt, Seq):
        target = init(stmt.second)
        return (flow_edges(stmt.first) | flow_edges(stmt.second)
                | {Edge(l, target) for l in final(stmt.first)})
    if isinstance(stmt, If):
        return (flow_edges(stmt.then) | flow_edges(stmt.orelse)
                | {Edge(stmt.label, init(stmt.then), TRUE),
                   Edge(stmt.label, init(stmt.orelse), FALSE)})
    if isinstance(stmt, While):
        return (flow_edges(stmt.body)
                | {Edge(stmt.label, init(stmt.body), TRUE)}
                | {Edge(l, stmt.label) for l in final(stmt.body)})
    raise TypeError(f"not a statement: {stmt!r}")


@dataclass(frozen=True)
class FlowGraph:
    blocks: dict  # label -> Skip | Assign | Random | Test
    init: int
    finals: frozenset
    edges: tuple  # of Edge, sorted by (src, dst)

    def successors(self, label) -> list:
        return [e for e in self.edges if e.src == label]

    def predecessors(self, label) -> list:
        return [e for e in self.edges if e.dst == label]

    def is_test(self, label) -> bool:
        return isinstance(self.blocks[label], Test)

    def true_target(self, label) -> Optional[int]:
        for e in self.successors(label):
            if e.branch == TRUE:
                return e.dst
        return None

    def false_target(self, label) -> Optional[int]:
        """Successor on a failed test.

        For a while test this is the edge contributed by the enclosing
        sequence (or ``None`` when the loop ends the program).
        """
        for e in self.successors(label):
            if e.branch != TRUE:
                return e.dst
        return None

    @property
    def labels(self):
        return sorted(self.blocks)

    def reverse(self) -> list:
        return [Edge(e.dst, e.src, e.branch) for e in self.edges]

    def to_dict(self) -> dict:
        return {
            "blocks": {str(l): {"kind": block_kind(b), "text": format_block(b)}
                       for l, b in sorted(self.blocks.items())},
            "init": self.init,
            "finals": sorted(self.finals),
            "edges": [{"from": e.src, "to": e.dst, "branch": e.branch} for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dot(self, name="flow") -> str:
        lines = [f"digraph {name} {{", "  node [shape=box];"]
        for l, b in sorted(self.blocks.items()):
            text = format_bexpr(b.cond) if isinstance(b, Test) else format_block(replace(b, label=None))
            shape = ", shape=diamond" if isinstance(b, Test) else ""
            periph = ", peripheries=2" if l in self.finals else ""
            text = text.replace('"', r'\"')
            lines.append(f'  n{l} [label="{l}: {text}"{shape}{periph}];')
        lines.append(f"  start [shape=point];\n  start -> n{self.init};")
        for e in self.edges:
            attr = ' [label="T"]' if e.branch == TRUE else ""
            lines.append(f"  n{e.src} -> n{e.dst}{attr};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def flow(stmt) -> FlowGraph:
    """Build the flow graph of a fully labelled statement."""
    blocks = {}
    for node in iter_blocks(stmt):
        blocks[node.label] = as_block(node)
    edges = tuple(sorted(flow_edges(stmt), key=lambda e: (e.src, e.dst)))
    return FlowGraph(blocks, init(stmt), final(stmt), edges)


def used_vars(block) -> frozenset:
    if isinstance(block, Assign):
        return free_vars(block.expr)
    if isinstance(block, Test):
        return free_vars(block.cond)
    return frozenset()
