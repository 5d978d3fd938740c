import itertools

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riboflow import (
    build_model,
    chordless_cycles,
    condensation,
    connectivity,
    count_chordless_cycles,
    cyclomatic_number,
    donors_receptors,
)
from riboflow.errors import BadCapacity, CycleBudgetExceeded, DuplicateEdge, IndexOutOfRange, LoopEdge

from conftest import EX2, TRIANGLE


@st.composite
def models(draw, max_m=7):
    m = draw(st.integers(1, max_m))
    pairs = [(i, j) for i in range(1, m + 1) for j in range(1, m + 1) if i != j]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    return build_model(m, edges, [1.0] * m)


def test_build_triangle(triangle):
    assert triangle.m == 3
    assert triangle.transitions == tuple(TRIANGLE)
    assert list(triangle.c) == [5, 25, 50]
    assert triangle.total_capacity == 80


def test_single_compartment_without_edges():
    model = build_model(1, [], [1])
    assert model.transitions == ()
    assert connectivity(model).strongly_connected


@pytest.mark.parametrize(
    "m, edges, caps, exc",
    [
        (2, [(1, 1)], [1, 1], LoopEdge),
        (2, [(1, 2), (1, 2)], [1, 1], DuplicateEdge),
        (2, [(1, 3)], [1, 1], IndexOutOfRange),
        (2, [(1, 2)], [1, 0], BadCapacity),
        (2, [(1, 2)], [1, float("inf")], BadCapacity),
        (2, [(1, 2)], [1], BadCapacity),
        (0, [], [], IndexOutOfRange),
    ],
)
def test_build_rejects(m, edges, caps, exc):
    with pytest.raises(exc):
        build_model(m, edges, caps)


def test_donors_receptors(triangle):
    assert donors_receptors(triangle, 1) == ({3}, {2})
    ex2 = build_model(3, EX2, [1, 1, 1])
    assert donors_receptors(ex2, 3) == ({2}, {1, 2})
    assert donors_receptors(build_model(2, [], [1, 1]), 2) == (frozenset(), frozenset())
    with pytest.raises(IndexOutOfRange):
        donors_receptors(triangle, 4)


def test_connectivity_examples(triangle):
    c = connectivity(triangle)
    assert c.strongly_connected and c.weakly_reversible

    c = connectivity(build_model(3, EX2, [1, 1, 1]))
    assert not c.strongly_connected
    comps = c.condensation.components
    assert set(comps) == {frozenset({1}), frozenset({2, 3})}
    lab = dict(zip(comps, c.condensation.labels))
    assert lab[frozenset({1})] == "trap"
    assert lab[frozenset({2, 3})] == "source"

    c = connectivity(build_model(4, [(1, 2), (2, 1), (3, 4), (4, 3)], [1] * 4))
    assert c.weakly_reversible and not c.strongly_connected


@settings(max_examples=150, deadline=None)
@given(models())
def test_condensation_matches_networkx(model):
    g = nx.DiGraph()
    g.add_nodes_from(range(1, model.m + 1))
    g.add_edges_from(model.transitions)
    dag = condensation(model)
    assert set(dag.components) == {frozenset(c) for c in nx.strongly_connected_components(g)}
    # components partition the vertex set
    assert sorted(v for c in dag.components for v in c) == list(range(1, model.m + 1))
    # dag edges point forward in the returned order, so the order is topological
    assert all(a < b for a, b in dag.dag_edges)
    cg = nx.condensation(g)
    assert len(dag.dag_edges) == cg.number_of_edges()
    assert connectivity(model).weakly_reversible == all(nx.has_path(g, j, i) for i, j in g.edges)


def test_chordless_examples(triangle):
    assert count_chordless_cycles(triangle) == 1
    assert count_chordless_cycles(build_model(3, [(1, 2), (2, 3)], [1] * 3)) == 0
    k4 = build_model(4, [(i, j) for i in range(1, 5) for j in range(1, 5) if i != j], [1] * 4)
    assert count_chordless_cycles(k4) == 4
    # a 4-cycle without chords
    sq = build_model(4, [(1, 2), (2, 3), (3, 4), (4, 1)], [1] * 4)
    assert chordless_cycles(sq) == [(1, 2, 3, 4)]


def _brute_chordless(model):
    und = {frozenset(e) for e in model.undirected_edges}
    count = 0
    verts = range(1, model.m + 1)
    for k in range(3, model.m + 1):
        for sub in itertools.combinations(verts, k):
            edges = [e for e in und if e <= set(sub)]
            # induced subgraph is a single cycle iff k edges and every degree is 2 and connected
            if len(edges) != k:
                continue
            deg = {v: sum(v in e for e in edges) for v in sub}
            if any(d != 2 for d in deg.values()):
                continue
            g = nx.Graph([tuple(e) for e in edges])
            if nx.is_connected(g):
                count += 1
    return count


@settings(max_examples=120, deadline=None)
@given(models(max_m=7))
def test_chordless_against_oracles(model):
    n = count_chordless_cycles(model)
    assert n == _brute_chordless(model)
    g = nx.Graph([tuple(e) for e in model.undirected_edges])
    assert n == sum(1 for c in nx.chordless_cycles(g) if len(c) >= 3)


@settings(max_examples=100, deadline=None)
@given(models())
def test_cyclomatic_number(model):
    g = nx.Graph()
    g.add_nodes_from(range(1, model.m + 1))
    g.add_edges_from(tuple(e) for e in model.undirected_edges)
    assert cyclomatic_number(model) == g.number_of_edges() - g.number_of_nodes() + nx.number_connected_components(g)


def test_cycle_budget():
    # 4x4 grid: many long induced paths
    g = nx.convert_node_labels_to_integers(nx.grid_2d_graph(4, 4), first_label=1)
    grid = build_model(16, list(g.edges), [1] * 16)
    assert count_chordless_cycles(grid) == sum(1 for _ in nx.chordless_cycles(g))
    with pytest.raises(CycleBudgetExceeded):
        count_chordless_cycles(grid, budget=50)


def test_reversed_and_subgraph(triangle):
    rev = triangle.reversed()
    assert set(rev.transitions) == {(2, 1), (3, 2), (1, 3)}
    sub, labels = triangle.subgraph([2, 3])
    assert sub.m == 2 and sub.transitions == ((1, 2),)
    assert list(sub.c) == [25, 50]
    assert labels == [2, 3]
