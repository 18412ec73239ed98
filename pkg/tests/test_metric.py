from __future__ import annotations

import itertools
import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coarsekit import cayley
from coarsekit.errors import ValidationError
from coarsekit.metric import (FiniteMetricSpace, Recipe, bounded_geometry_profile, build_family, build_space,
                              family_from_json, family_profile, family_to_json, load_space, nesting_failures,
                              parse_recipe, save_space, space_from_label, validate_metric)

PATH = Recipe("path")
GRID = Recipe("grid", dim=2)
KGRID = Recipe("kgrid", dim=2)


def bfs_distances(G, nodes):
    lengths = dict(nx.all_pairs_shortest_path_length(G))
    return np.array([[lengths[a][b] for b in nodes] for a in nodes])


def test_path_distance():
    X = build_space(PATH, 4)
    assert X.n == 4 and X.dist[0, 3] == 3


@pytest.mark.parametrize("side", [1, 3, 5])
def test_grid_matches_bfs(side):
    X = build_space(GRID, side)
    assert X.n == side * side
    assert np.array_equal(X.dist, bfs_distances(nx.grid_2d_graph(side, side), list(X.points)))


def test_grid3_corner_to_corner():
    X = build_space(GRID, 3)
    a, b = X.points.index((0, 0)), X.points.index((2, 2))
    assert X.dist[a, b] == 4


@pytest.mark.parametrize("side", [2, 4])
def test_kgrid_matches_king_graph(side):
    G = nx.grid_2d_graph(side, side)
    for x, y in itertools.product(range(side - 1), range(side - 1)):
        G.add_edge((x, y), (x + 1, y + 1))
        G.add_edge((x + 1, y), (x, y + 1))
    X = build_space(KGRID, side)
    assert np.array_equal(X.dist, bfs_distances(G, list(X.points)))


def test_z2_ball_has_13_points():
    X = build_space(Recipe("cayley", preset="Z2"), 2)
    lattice = [(a, b) for a in range(-2, 3) for b in range(-2, 3) if abs(a) + abs(b) <= 2]
    assert X.n == len(lattice) == 13


def test_free_group_ball_sizes():
    # 1 + 4 + 4*3 reduced words
    assert build_space(Recipe("cayley", preset="free2"), 2).n == 17


@pytest.mark.parametrize("name,radius", [("Z2", 2), ("heisenberg", 2), ("free2", 2), ("sym4", 2)])
def test_cayley_metric_matches_ambient_bfs(name, radius):
    gens = cayley.preset(name)
    order, length, _ = cayley.word_ball(gens, 2 * radius + 1)
    G = nx.Graph()
    for g in order:
        if length[g] <= 2 * radius:
            for s in gens.elements:
                G.add_edge(g, gens.multiply(g, s))
    X = build_space(Recipe("cayley", preset=name), radius)
    # word metric is left-invariant: d(g, h) = |g^-1 h| equals graph distance with right multiplication
    assert np.array_equal(X.dist, bfs_distances(G, list(X.points)))


def test_tree_depth_two():
    X = build_space(Recipe("tree", branching=2), 2)
    assert X.n == 7 and X.diameter == 4


def test_invalid_generating_sets_rejected():
    with pytest.raises(ValidationError, match="identity"):
        cayley.generating_set("permutation", [[0, 1, 2], [1, 0, 2]])
    with pytest.raises(ValidationError, match="symmetric"):
        cayley.generating_set("permutation", [[1, 2, 0]])
    with pytest.raises(ValidationError, match="unimodular"):
        cayley.generating_set("matrix", [[[2, 0], [0, 1]]])
    with pytest.raises(ValidationError):
        parse_recipe("cayley:nope")


def test_custom_generators_build():
    gens = cayley.generating_set("permutation", [[1, 2, 0], [2, 0, 1]])
    X = build_space(Recipe("cayley", generators=gens), 1)
    assert X.n == 3 and X.diameter == 1


def test_profile_examples():
    p = bounded_geometry_profile(build_space(PATH, 5), 1)
    assert p.entries == (1, 3)
    assert bounded_geometry_profile(build_space(GRID, 5), 1)[1] == 5
    X = build_space(GRID, 4)
    assert bounded_geometry_profile(X, X.diameter + 2)[X.diameter] == X.n


@pytest.mark.parametrize("recipe", [PATH, GRID, KGRID, Recipe("tree", branching=3),
                                    Recipe("cayley", preset="Z2"), Recipe("cayley", preset="heisenberg")])
def test_families_nest(recipe):
    sizes = [2, 3, 4] if recipe.kind in ("path", "grid", "kgrid") else [1, 2, 3]
    fam = build_family(recipe, sizes)
    assert nesting_failures(fam) == []


@pytest.mark.parametrize("side", [4, 8, 16])
def test_grid_growth_is_polynomial(side):
    X = build_space(GRID, side)
    prof = bounded_geometry_profile(X, X.diameter + 1)
    for R, N in enumerate(prof.entries):
        assert N <= (2 * R + 1) ** 2
    assert all(a <= b for a, b in zip(prof.entries, prof.entries[1:]))
    assert prof.entries[0] == 1 and prof.entries[-1] == X.n


def test_family_profile_bounds_members():
    fam = build_family(GRID, [4, 8, 16])
    fp = family_profile(fam, 5)
    for i in fam.indices:
        assert all(a <= b for a, b in zip(bounded_geometry_profile(fam[i], 5).entries, fp.entries))


def test_validate_metric_examples():
    assert validate_metric(build_space(PATH, 3)) == []
    bad = FiniteMetricSpace(3, np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]]), "bad")
    tri = [v for v in validate_metric(bad) if v.axiom == "triangle"]
    assert tri and tri[0].witness == (0, 1, 2)
    zero = FiniteMetricSpace(2, np.array([[0, 0], [0, 0]]), "z")
    assert any(v.axiom == "discreteness" for v in validate_metric(zero))
    asym = FiniteMetricSpace(2, np.array([[0, 1], [2, 0]]), "a")
    assert any(v.axiom == "symmetry" for v in validate_metric(asym))


def test_json_round_trip_and_errors():
    X = build_space(PATH, 3)
    assert load_space(save_space(X)) == X
    with pytest.raises(ValidationError, match="dist"):
        load_space(json.dumps({"label": "x", "n": 2}))
    with pytest.raises(ValidationError):
        load_space(json.dumps({"label": "x", "n": 2, "dist": [[0, 1], [2, 0]]}))
    with pytest.raises(ValidationError):
        load_space("{not json")


def test_family_json_round_trip():
    fam = build_family(GRID, [2, 3])
    back = family_from_json(json.loads(json.dumps(family_to_json(fam))))
    assert all(back[i] == fam[i] for i in fam.indices)


def test_space_from_label():
    for label in ["path-5", "grid2-3", "kgrid2-3", "tree2-2", "cayley-Z2-1"]:
        assert space_from_label(label).label == label
    with pytest.raises(ValidationError):
        space_from_label("nonsense")


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.floats(0.2, 0.9), st.integers(0, 10_000))
def test_graph_metrics_validate(n, p, seed):
    G = nx.gnp_random_graph(n, p, seed=seed)
    G.add_edges_from((i, i + 1) for i in range(n - 1))  # keep it connected
    D = bfs_distances(G, list(range(n)))
    assert validate_metric(FiniteMetricSpace(n, D, "g")) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.integers(0, 10_000))
def test_fast_path_agrees_with_triangle_scan(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(1, 4, (n, n))
    D = np.triu(A, 1) + np.triu(A, 1).T
    brute_ok = all(D[x, z] <= D[x, y] + D[y, z] for x in range(n) for y in range(n) for z in range(n))
    report = validate_metric(FiniteMetricSpace(n, D, "r"))
    assert (report == []) == brute_ok
