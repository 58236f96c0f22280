"""Process graphs: validation and the structural queries used by the estimators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CycleDetected, DuplicateNode, OutputIsSource, UnknownEndpoint, UnknownNode


@dataclass(frozen=True)
class Decomposition:
    """Partition of a node set into mutually independent groups."""

    level: int
    groups: tuple[tuple[str, ...], ...]

    @property
    def n(self) -> int:
        return len(self.groups)

    @property
    def members(self) -> tuple[str, ...]:
        return tuple(v for g in self.groups for v in g)


class ProcessDag:
    """Immutable directed acyclic graph over named nodes.

    Node sets returned by the query methods are tuples in declaration order.
    """

    def __init__(self, nodes: Sequence[str], edges: Iterable[tuple[str, str]]):
        nodes = tuple(nodes)
        seen: set[str] = set()
        for v in nodes:
            if v in seen:
                raise DuplicateNode(f"duplicate node {v!r}")
            seen.add(v)
        self.nodes = nodes
        self.index = {v: i for i, v in enumerate(nodes)}

        edge_list = []
        for a, b in edges:
            for end in (a, b):
                if end not in self.index:
                    raise UnknownEndpoint(f"edge ({a!r}, {b!r}) references undeclared node {end!r}")
            if (a, b) not in edge_list:
                edge_list.append((a, b))
        self.edges = frozenset(edge_list)

        n = len(nodes)
        adj = np.zeros((n, n), dtype=np.int8)
        for a, b in edge_list:
            adj[self.index[a], self.index[b]] = 1
        adj.setflags(write=False)
        self.adjacency = adj

        self._preds = {v: self._ordered(a for a, b in edge_list if b == v) for v in nodes}
        self._succs = {v: self._ordered(b for a, b in edge_list if a == v) for v in nodes}
        self._check_acyclic()
        self._ancestors = self._compute_ancestors()

    def __repr__(self) -> str:
        return f"ProcessDag({len(self.nodes)} nodes, {len(self.edges)} edges)"

    def _ordered(self, names: Iterable[str]) -> tuple[str, ...]:
        return tuple(sorted(set(names), key=self.index.__getitem__))

    def _check(self, names: Iterable[str]) -> list[str]:
        names = list(names)
        for v in names:
            if v not in self.index:
                raise UnknownNode(f"unknown node {v!r}")
        return names

    def _check_acyclic(self) -> None:
        white, grey, black = 0, 1, 2
        color = dict.fromkeys(self.nodes, white)
        for root in self.nodes:
            if color[root] != white:
                continue
            stack = [(root, iter(self._succs[root]))]
            color[root] = grey
            while stack:
                v, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[v] = black
                    stack.pop()
                elif color[nxt] == grey:
                    raise CycleDetected(nxt)
                elif color[nxt] == white:
                    color[nxt] = grey
                    stack.append((nxt, iter(self._succs[nxt])))

    def _compute_ancestors(self) -> dict[str, frozenset[str]]:
        anc: dict[str, frozenset[str]] = {}
        for v in self.topological_order():
            acc = {v}
            for u in self._preds[v]:
                acc |= anc[u]
            anc[v] = frozenset(acc)
        return anc

    # basic structure

    def topological_order(self) -> tuple[str, ...]:
        """Kahn's algorithm, ties broken by declaration order."""
        indeg = {v: len(self._preds[v]) for v in self.nodes}
        ready = [v for v in self.nodes if indeg[v] == 0]
        out = []
        while ready:
            ready.sort(key=self.index.__getitem__)
            v = ready.pop(0)
            out.append(v)
            for w in self._succs[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        return tuple(out)

    def direct_predecessors(self, node: str) -> tuple[str, ...]:
        self._check([node])
        return self._preds[node]

    def successors(self, node: str) -> tuple[str, ...]:
        self._check([node])
        return self._succs[node]

    def ancestors(self, node: str) -> frozenset[str]:
        """Ancestors of ``node``, including the node itself."""
        self._check([node])
        return self._ancestors[node]

    def is_source(self, node: str) -> bool:
        self._check([node])
        return not self._preds[node]

    def sources(self) -> tuple[str, ...]:
        col = self.adjacency.sum(axis=0)
        return tuple(v for v, c in zip(self.nodes, col) if c == 0)

    def sinks(self) -> tuple[str, ...]:
        row = self.adjacency.sum(axis=1)
        return tuple(v for v, r in zip(self.nodes, row) if r == 0)

    def has_path(self, a: str, b: str) -> bool:
        """True when a directed path of at least one edge leads from ``a`` to ``b``."""
        self._check([a, b])
        return any(a in self._ancestors[p] for p in self._preds[b])

    def influencing_inputs(self, output: str) -> tuple[str, ...]:
        """Source nodes with a path to ``output``."""
        self._check([output])
        return tuple(v for v in self.sources() if self.has_path(v, output))

    # predecessor operator

    def predecessor_operator(self, s: Iterable[str]) -> tuple[str, ...]:
        """Direct predecessors of the members of ``s`` plus the sources in ``s``."""
        s = self._check(s)
        out: set[str] = set()
        for v in s:
            preds = self._preds[v]
            if preds:
                out.update(preds)
            else:
                out.add(v)
        return self._ordered(out)

    def predecessor_sequence(self, output: str) -> list[tuple[str, ...]]:
        """``[P^1(y), ..., P^L(y)]`` for the output node ``y``."""
        self._check([output])
        if not self._preds[output]:
            raise OutputIsSource(f"output {output!r} is a source node")
        seq = [self.predecessor_operator([output])]
        for _ in range(len(self.nodes) + 1):
            nxt = self.predecessor_operator(seq[-1])
            if nxt == seq[-1]:
                return seq
            seq.append(nxt)
        raise AssertionError("predecessor operator did not reach a fixed point")

    def iteration_depth(self, output: str) -> int:
        return len(self.predecessor_sequence(output))

    def independent_decomposition(self, s: Iterable[str], level: int = 1) -> Decomposition:
        """Connected components of ``s`` under the shared-ancestor relation."""
        members = self._ordered(self._check(s))
        parent = {v: v for v in members}

        def find(v: str) -> str:
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for i, u in enumerate(members):
            for w in members[i + 1:]:
                if self._ancestors[u] & self._ancestors[w]:
                    ru, rw = find(u), find(w)
                    if ru != rw:
                        parent[rw] = ru
        groups: dict[str, list[str]] = {}
        for v in members:
            groups.setdefault(find(v), []).append(v)
        ordered = sorted(groups.values(), key=lambda g: self.index[g[0]])
        return Decomposition(level=level, groups=tuple(tuple(g) for g in ordered))

    def level_decompositions(self, output: str) -> list[Decomposition]:
        return [
            self.independent_decomposition(s, level=l)
            for l, s in enumerate(self.predecessor_sequence(output), start=1)
        ]

    # sample-size bookkeeping

    def max_regression_width(self, output: str) -> int:
        """Largest number of regressors used by any network sub-fit.

        This is the number of direct predecessors of the output, or of any
        non-source node met while tracing the output back to its inputs,
        whichever is largest.
        """
        seq = self.predecessor_sequence(output)
        width = len(self._preds[output])
        for frontier in seq[:-1]:
            for v in frontier:
                width = max(width, len(self._preds[v]))
        return width


def build_dag(nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> ProcessDag:
    return ProcessDag(nodes, edges)
