"""Conflict graph and abort selection.

The conflict graph has an edge (i, j) when transaction i's read-set keys
intersect transaction j's write-set keys.  Making it acyclic with a small,
sparsity-friendly abort set works per strongly connected component: vertices
with zero in- or out-degree are pruned (they can always commit), and within
each non-trivial SCC the vertex with the largest in-degree and smallest
out-degree is aborted greedily until no cycle remains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


@dataclass
class ConflictGraph:
    vertices: set[int] = field(default_factory=set)
    edges: set[tuple[int, int]] = field(default_factory=set)

    def add_vertex(self, v: int) -> None:
        self.vertices.add(v)

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError("self loops are not conflict edges")
        self.vertices.add(u)
        self.vertices.add(v)
        self.edges.add((u, v))

    def successors(self) -> dict[int, list[int]]:
        succ: dict[int, list[int]] = {v: [] for v in self.vertices}
        for u, v in self.edges:
            succ[u].append(v)
        return succ

    def predecessors(self) -> dict[int, list[int]]:
        pred: dict[int, list[int]] = {v: [] for v in self.vertices}
        for u, v in self.edges:
            pred[v].append(u)
        return pred

    def subgraph(self, keep: Iterable[int]) -> "ConflictGraph":
        keep = set(keep)
        return ConflictGraph(
            vertices=keep,
            edges={(u, v) for u, v in self.edges if u in keep and v in keep},
        )

    def without(self, removed: Iterable[int]) -> "ConflictGraph":
        return self.subgraph(self.vertices - set(removed))


@dataclass
class SccDecomposition:
    components: list[set[int]]
    component_of: dict[int, int]


def prune(g: ConflictGraph) -> ConflictGraph:
    """Repeatedly drop vertices with zero in-degree or out-degree.

    Pruned vertices can never lie on a cycle, so they are commit vertices,
    never abort candidates.
    """
    succ = {v: set() for v in g.vertices}
    pred = {v: set() for v in g.vertices}
    for u, v in g.edges:
        succ[u].add(v)
        pred[v].add(u)
    alive = set(g.vertices)
    worklist = [v for v in alive if not succ[v] or not pred[v]]
    while worklist:
        v = worklist.pop()
        if v not in alive:
            continue
        if succ[v] and pred[v]:
            continue
        alive.discard(v)
        for w in succ[v]:
            pred[w].discard(v)
            if not pred[w]:
                worklist.append(w)
        for w in pred[v]:
            succ[w].discard(v)
            if not succ[w]:
                worklist.append(w)
    return g.subgraph(alive)


def find_sccs(g: ConflictGraph) -> SccDecomposition:
    """Kosaraju two-pass decomposition, iterative, O(|V| + |E|)."""
    succ = g.successors()
    order: list[int] = []
    seen: set[int] = set()
    for root in g.vertices:
        if root in seen:
            continue
        # (vertex, iterator over successors) stack for postorder
        seen.add(root)
        stack = [(root, iter(succ[root]))]
        while stack:
            v, it = stack[-1]
            advanced = False
            for w in it:
                if w not in seen:
                    seen.add(w)
                    stack.append((w, iter(succ[w])))
                    advanced = True
                    break
            if not advanced:
                order.append(v)
                stack.pop()

    pred = g.predecessors()
    components: list[set[int]] = []
    component_of: dict[int, int] = {}
    for root in reversed(order):
        if root in component_of:
            continue
        idx = len(components)
        comp = {root}
        component_of[root] = idx
        stack2 = [root]
        while stack2:
            v = stack2.pop()
            for w in pred[v]:
                if w not in component_of:
                    component_of[w] = idx
                    comp.add(w)
                    stack2.append(w)
        components.append(comp)
    return SccDecomposition(components, component_of)


def choose_vertex(scc: ConflictGraph) -> int:
    """Greedy abort choice: largest in-degree, then smallest out-degree,
    degrees counted inside the component subgraph; ties go to the smallest id.
    """
    if len(scc.vertices) < 2:
        raise ValueError("choose_vertex needs a component of size >= 2")
    indeg = {v: 0 for v in scc.vertices}
    outdeg = {v: 0 for v in scc.vertices}
    for u, v in scc.edges:
        outdeg[u] += 1
        indeg[v] += 1
    return min(scc.vertices, key=lambda v: (-indeg[v], outdeg[v], v))


def find_abort_set(g: ConflictGraph) -> set[int]:
    """Vertices to abort so the remaining graph is acyclic."""
    aborted: set[int] = set()
    pruned = prune(g)
    dec = find_sccs(pruned)
    # bucket intra-component edges once, so work stays linear even when the
    # graph splinters into many small components
    comp_edges: list[set[tuple[int, int]]] = [set() for _ in dec.components]
    for u, v in pruned.edges:
        cu = dec.component_of[u]
        if cu == dec.component_of[v]:
            comp_edges[cu].add((u, v))
    for comp, edges in zip(dec.components, comp_edges):
        if len(comp) > 1:
            _greedy_select(ConflictGraph(set(comp), edges), aborted)
    return aborted


def _greedy_select(component: ConflictGraph, out: set[int]) -> None:
    victim = choose_vertex(component)
    out.add(victim)
    remnant = prune(component.without({victim}))
    # removing a vertex can split the component
    for comp in find_sccs(remnant).components:
        if len(comp) > 1:
            _greedy_select(remnant.subgraph(comp), out)


def has_cycle(g: ConflictGraph) -> bool:
    """Iterative three-color DFS cycle check."""
    succ = g.successors()
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {v: WHITE for v in g.vertices}
    for root in g.vertices:
        if color[root] != WHITE:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = GRAY
        while stack:
            v, it = stack[-1]
            advanced = False
            for w in it:
                if color[w] == GRAY:
                    return True
                if color[w] == WHITE:
                    color[w] = GRAY
                    stack.append((w, iter(succ[w])))
                    advanced = True
                    break
            if not advanced:
                color[v] = BLACK
                stack.pop()
    return False
