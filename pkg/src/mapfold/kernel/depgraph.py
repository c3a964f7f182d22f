"""Def-use dependency graph over a kernel's statements."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .ir import Assign, Expr, ReducerKernel, reads


class Region(enum.Enum):
    INIT = "init"
    LOOP = "loop"
    FINALIZE = "finalize"


@dataclass(frozen=True)
class Node:
    id: int
    region: Region
    var: str | None  # None for the emit node
    expr: Expr


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    var: str
    carried: bool = False  # flows around the loop back edge


@dataclass(frozen=True)
class DepGraph:
    nodes: tuple[Node, ...]
    edges: frozenset[Edge]

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def region(self, region: Region) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.region is region)

    def incoming(self, node_id: int) -> list[Edge]:
        return sorted((e for e in self.edges if e.dst == node_id), key=lambda e: (e.var, e.src))

    def outgoing(self, node_id: int) -> list[Edge]:
        return sorted((e for e in self.edges if e.src == node_id), key=lambda e: (e.dst, e.var))

    @property
    def emit_node(self) -> Node:
        return self.nodes[-1]


def build_dep_graph(k: ReducerKernel) -> DepGraph:
    """Build def-use edges; reaching definitions are unique per path because the IR has no branches.

    A loop statement reading an accumulator before the body redefines it gets
    two edges: the entry edge from the init block and a carried edge from the
    body's last definition. The emit node only sees body definitions when the
    body assigns the variable, since the loop runs at least once.
    """
    nodes: list[Node] = []
    for a in k.init:
        nodes.append(Node(len(nodes), Region.INIT, a.var, a.expr))
    body_start = len(nodes)
    for a in k.body:
        nodes.append(Node(len(nodes), Region.LOOP, a.var, a.expr))
    nodes.append(Node(len(nodes), Region.FINALIZE, None, k.emit))

    last_init: dict[str, int] = {}
    edges: set[Edge] = set()
    for n in nodes[:body_start]:
        for var in reads(n.expr):
            edges.add(Edge(last_init[var], n.id, var))
        last_init[n.var] = n.id

    body_nodes = nodes[body_start:-1]
    last_body: dict[str, int] = {}
    for n in body_nodes:
        last_body[n.var] = n.id
    seen: dict[str, int] = {}
    for n in body_nodes:
        for var in reads(n.expr):
            if var in seen:
                edges.add(Edge(seen[var], n.id, var))
            else:
                edges.add(Edge(last_init[var], n.id, var))
                if var in last_body:
                    edges.add(Edge(last_body[var], n.id, var, carried=True))
        seen[n.var] = n.id

    emit = nodes[-1]
    for var in reads(emit.expr):
        src = last_body.get(var, last_init.get(var))
        edges.add(Edge(src, emit.id, var))
    return DepGraph(tuple(nodes), frozenset(edges))


def statement(k: ReducerKernel, node: Node) -> Assign | None:
    """The IR assignment a node stands for, or None for the emit node."""
    if node.region is Region.INIT:
        return k.init[node.id]
    if node.region is Region.LOOP:
        return k.body[node.id - len(k.init)]
    return None
