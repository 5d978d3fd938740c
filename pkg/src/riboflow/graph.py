"""Compartmental graphs and their structural invariants.

Compartments are labelled 1..m in everything a caller sees (transition pairs,
donor/receptor sets, component vertex sets). Arrays indexed by compartment
are 0-based, so compartment ``i`` lives at position ``i - 1``.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import (
    BadCapacity,
    CycleBudgetExceeded,
    DuplicateEdge,
    IndexOutOfRange,
    LoopEdge,
)

Edge = Tuple[int, int]

DEFAULT_CYCLE_BUDGET = 10**6


@dataclass(frozen=True)
class CompartmentalModel:
    """Directed graph of compartments with per-compartment capacities.

    Use :func:`build_model` to construct a validated instance.
    """

    m: int
    transitions: Tuple[Edge, ...]
    capacities: Tuple[float, ...]

    @cached_property
    def c(self) -> np.ndarray:
        return np.asarray(self.capacities, dtype=float)

    @property
    def total_capacity(self) -> float:
        return float(sum(self.capacities))

    @cached_property
    def src(self) -> np.ndarray:
        """0-based source index of every transition."""
        return np.array([i - 1 for i, _ in self.transitions], dtype=np.intp)

    @cached_property
    def dst(self) -> np.ndarray:
        return np.array([j - 1 for _, j in self.transitions], dtype=np.intp)

    @cached_property
    def undirected_edges(self) -> Tuple[FrozenSet[int], ...]:
        """Edges of |D| (antiparallel pairs merged), in first-seen order."""
        seen = {}
        for i, j in self.transitions:
            seen.setdefault(frozenset((i, j)), None)
        return tuple(seen)

    def reversed(self) -> "CompartmentalModel":
        return build_model(self.m, [(j, i) for i, j in self.transitions], self.capacities)

    def subgraph(self, vertices: Iterable[int]) -> Tuple["CompartmentalModel", List[int]]:
        """Induced submodel on ``vertices``; returns it with the old labels in new order."""
        keep = sorted(set(vertices))
        relabel = {v: k + 1 for k, v in enumerate(keep)}
        edges = [(relabel[i], relabel[j]) for i, j in self.transitions if i in relabel and j in relabel]
        caps = [self.capacities[v - 1] for v in keep]
        return build_model(len(keep), edges, caps), keep


@dataclass(frozen=True)
class ComponentDag:
    """Condensation of a compartmental graph into strongly connected components."""

    components: Tuple[FrozenSet[int], ...]
    dag_edges: Tuple[Tuple[int, int], ...]
    labels: Tuple[str, ...]

    def component_of(self, vertex: int) -> int:
        for k, comp in enumerate(self.components):
            if vertex in comp:
                return k
        raise IndexOutOfRange(f"vertex {vertex} is in no component")

    @property
    def traps(self) -> List[int]:
        """Components without outgoing DAG edges (isolated ones included)."""
        out = {a for a, _ in self.dag_edges}
        return [k for k in range(len(self.components)) if k not in out]

    @property
    def sources(self) -> List[int]:
        """Components without incoming DAG edges (isolated ones included)."""
        inc = {b for _, b in self.dag_edges}
        return [k for k in range(len(self.components)) if k not in inc]


@dataclass(frozen=True)
class Connectivity:
    strongly_connected: bool
    weakly_reversible: bool
    condensation: ComponentDag


def build_model(m: int, transitions: Iterable[Sequence[int]], capacities: Sequence[float]) -> CompartmentalModel:
    """Validate and build a compartmental model.

    >>> build_model(3, [(1, 2), (2, 3), (3, 1)], [5, 25, 50]).m
    3
    """
    if int(m) != m or m < 1:
        raise IndexOutOfRange(f"compartment count must be a positive integer, got {m!r}")
    m = int(m)
    caps = tuple(float(x) for x in capacities)
    if len(caps) != m:
        raise BadCapacity(f"expected {m} capacities, got {len(caps)}")
    for k, x in enumerate(caps, start=1):
        if not np.isfinite(x) or x <= 0:
            raise BadCapacity(f"capacity of compartment {k} must be positive and finite, got {x}")
    edges: List[Edge] = []
    seen = set()
    for pair in transitions:
        if len(pair) != 2:
            raise IndexOutOfRange(f"transition must be a pair, got {pair!r}")
        i, j = pair
        if int(i) != i or int(j) != j:
            raise IndexOutOfRange(f"compartment labels must be integers, got {pair!r}")
        i, j = int(i), int(j)
        if not (1 <= i <= m and 1 <= j <= m):
            raise IndexOutOfRange(f"transition {(i, j)} outside 1..{m}")
        if i == j:
            raise LoopEdge(f"loop edge {(i, j)} is not allowed")
        if (i, j) in seen:
            raise DuplicateEdge(f"duplicate transition {(i, j)}")
        seen.add((i, j))
        edges.append((i, j))
    return CompartmentalModel(m, tuple(edges), caps)


def _check_vertex(model: CompartmentalModel, i: int) -> None:
    if not (1 <= i <= model.m):
        raise IndexOutOfRange(f"compartment {i} outside 1..{model.m}")


def donors_receptors(model: CompartmentalModel, i: int) -> Tuple[FrozenSet[int], FrozenSet[int]]:
    """Donor set (sources of edges into ``i``) and receptor set (targets of edges out of ``i``)."""
    _check_vertex(model, i)
    donors = frozenset(a for a, b in model.transitions if b == i)
    receptors = frozenset(b for a, b in model.transitions if a == i)
    return donors, receptors


def _tarjan(m: int, succ: Dict[int, List[int]]) -> List[List[int]]:
    # Iterative Tarjan; vertices 1..m. Components come out in reverse topological order.
    index: Dict[int, int] = {}
    low: Dict[int, int] = {}
    on_stack = set()
    stack: List[int] = []
    comps: List[List[int]] = []
    counter = 0
    for root in range(1, m + 1):
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def condensation(model: CompartmentalModel) -> ComponentDag:
    succ: Dict[int, List[int]] = {}
    for i, j in model.transitions:
        succ.setdefault(i, []).append(j)
    comps = _tarjan(model.m, succ)
    # topological order: sources first
    comps.reverse()
    where = {v: k for k, comp in enumerate(comps) for v in comp}
    dag = sorted({(where[i], where[j]) for i, j in model.transitions if where[i] != where[j]})
    has_out = {a for a, _ in dag}
    has_in = {b for _, b in dag}
    labels = []
    for k in range(len(comps)):
        if k not in has_out and k not in has_in:
            labels.append("isolated")
        elif k not in has_out:
            labels.append("trap")
        elif k not in has_in:
            labels.append("source")
        else:
            labels.append("intermediate")
    return ComponentDag(tuple(frozenset(c) for c in comps), tuple(dag), tuple(labels))


def connectivity(model: CompartmentalModel) -> Connectivity:
    dag = condensation(model)
    return Connectivity(
        strongly_connected=len(dag.components) == 1,
        weakly_reversible=not dag.dag_edges,
        condensation=dag,
    )


def chordless_cycles(model: CompartmentalModel, budget: int = DEFAULT_CYCLE_BUDGET) -> List[Tuple[int, ...]]:
    """All chordless cycles (length >= 3) of the merged undirected graph |D|.

    Each cycle is returned once, starting at its smallest vertex. The search
    extends induced paths from that vertex; ``budget`` caps the number of
    partial paths explored.
    """
    adj: Dict[int, set] = {v: set() for v in range(1, model.m + 1)}
    for e in model.undirected_edges:
        a, b = tuple(e)
        adj[a].add(b)
        adj[b].add(a)

    cycles: List[Tuple[int, ...]] = []
    explored = 0
    for s in range(1, model.m + 1):
        # (path, blocked): blocked holds every neighbour of the interior path vertices
        stack = [((s, v), frozenset()) for v in sorted(adj[s]) if v > s]
        while stack:
            path, blocked = stack.pop()
            explored += 1
            if explored > budget:
                raise CycleBudgetExceeded(f"chordless cycle enumeration exceeded {budget} partial paths")
            last = path[-1]
            for w in sorted(adj[last]):
                if w <= s or w in path or w in blocked:
                    continue
                if s in adj[w]:
                    if len(path) >= 2 and path[1] < w:
                        cycles.append(path + (w,))
                    continue
                stack.append((path + (w,), blocked | adj[last]))
    cycles.sort()
    return cycles


def count_chordless_cycles(model: CompartmentalModel, budget: int = DEFAULT_CYCLE_BUDGET) -> int:
    return len(chordless_cycles(model, budget))


def cyclomatic_number(model: CompartmentalModel) -> int:
    """Dimension of the cycle space of |D|: edges - vertices + connected components."""
    parent = list(range(model.m + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in model.undirected_edges:
        a, b = tuple(e)
        parent[find(a)] = find(b)
    n_comp = len({find(v) for v in range(1, model.m + 1)})
    return len(model.undirected_edges) - model.m + n_comp
