from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coarsekit.errors import ValidationError
from coarsekit.maps import (BOUNDED, DIVERGENT, INCONCLUSIVE, PointMap, closeness_constant, compose,
                            expansion_profile, family_uniformity, identity_map, map_from_json,
                            map_uniformity, stabilization_verdict, verify_coarse_equivalence)
from coarsekit.metric import Recipe, build_space

PATH = Recipe("path")


def P(n):
    return build_space(PATH, n)


def pair_scan(f):
    """Oracle: S(R) from an explicit double loop."""
    X, Y = f.domain, f.codomain
    out = [0] * (X.diameter + 1)
    for a in range(X.n):
        for b in range(X.n):
            d = X.dist[a, b]
            out[d] = max(out[d], int(Y.dist[f(a), f(b)]))
    return list(np.maximum.accumulate(out))


def test_identity_profile():
    assert expansion_profile(identity_map(P(6))).entries == (0, 1, 2, 3, 4, 5)


def test_constant_profile():
    f = PointMap(P(6), P(6), np.zeros(6, dtype=int))
    assert set(expansion_profile(f).entries) == {0}


def test_doubling_profile_matches_scan():
    f = PointMap(P(5), P(10), 2 * np.arange(5))
    assert list(expansion_profile(f).entries) == pair_scan(f) == [0, 2, 4, 6, 8]


def test_closeness_examples():
    X = P(10)
    ident = identity_map(X)
    shift = PointMap(X, X, np.minimum(np.arange(10) + 1, 9))
    rev = PointMap(X, X, np.arange(10)[::-1])
    assert closeness_constant(ident, ident) == 0
    assert closeness_constant(ident, shift) == 1
    assert closeness_constant(ident, rev) == 9
    with pytest.raises(ValidationError):
        closeness_constant(ident, identity_map(P(5)))


def test_coarse_equivalence_examples():
    c = verify_coarse_equivalence(identity_map(P(8)), identity_map(P(8)))
    assert c.rho_f.entries == tuple(range(8)) and c.c_fg == 0
    f = PointMap(P(5), P(10), 2 * np.arange(5))
    g = PointMap(P(10), P(5), np.arange(10) // 2)
    c = verify_coarse_equivalence(f, g)
    assert (c.c_fg, c.c_gf) == (1, 0)
    with pytest.raises(ValidationError):
        verify_coarse_equivalence(f, f)


def test_certificate_constants_bounded_by_diameters():
    rng = np.random.default_rng(3)
    X, Y = P(7), build_space(Recipe("grid", dim=2), 3)
    f = PointMap(X, Y, rng.integers(0, Y.n, X.n))
    g = PointMap(Y, X, rng.integers(0, X.n, Y.n))
    c = verify_coarse_equivalence(f, g)
    assert c.c_fg <= Y.diameter and c.c_gf <= X.diameter


def test_identity_family_bounded():
    rep = family_uniformity({n: verify_coarse_equivalence(identity_map(P(n)), identity_map(P(n)))
                             for n in (8, 16, 32, 64)})
    assert rep.verdict == BOUNDED
    assert rep.sup_profiles["rho_f"] == list(range(8))


def test_reversal_family_divergent():
    certs = {}
    for n in (8, 16, 32, 64):
        X = P(n)
        certs[n] = verify_coarse_equivalence(PointMap(X, X, np.arange(n)[::-1]), identity_map(X))
    rep = family_uniformity(certs, embedding_tolerance=None)
    assert [rep.constants["c_gf"][n] for n in (8, 16, 32, 64)] == [7, 15, 31, 63]
    assert rep.constant_verdicts["c_gf"] == DIVERGENT
    assert rep.verdict == DIVERGENT


def test_reversal_family_fails_embedding_check():
    certs = {n: verify_coarse_equivalence(PointMap(P(n), P(n), np.arange(n)[::-1]), identity_map(P(n)))
             for n in (8, 16)}
    with pytest.raises(ValidationError, match="disagree"):
        family_uniformity(certs)


def test_kgrid_to_grid_profile_is_twice_r():
    maps = {}
    for s in (8, 16, 32):
        maps[s] = identity_map(build_space(Recipe("kgrid", dim=2), s), build_space(Recipe("grid", dim=2), s))
    rep = map_uniformity(maps)
    assert rep.verdict == BOUNDED
    assert rep.sup_profiles["f"] == [2 * R for R in rep.radii]


@pytest.mark.parametrize("vals,verdict", [
    ([0, 0, 0, 0], BOUNDED), ([7, 15, 31, 63], DIVERGENT), ([1, 3, 3, 3], BOUNDED),
    ([1, 2, 2, 5], INCONCLUSIVE), ([4], BOUNDED)])
def test_stabilization_rule(vals, verdict):
    assert stabilization_verdict(vals) == verdict


def test_map_json():
    X = P(4)
    f = PointMap(X, X, np.array([3, 2, 1, 0]))
    assert map_from_json(f.to_json(), {X.label: X}) == f
    with pytest.raises(ValidationError):
        map_from_json({"domain": X.label, "codomain": X.label, "table": [0, 1]}, {X.label: X})
    with pytest.raises(ValidationError):
        map_from_json({"domain": "nope", "codomain": X.label, "table": []}, {X.label: X})


def test_table_validation():
    with pytest.raises(ValidationError):
        PointMap(P(3), P(3), np.array([0, 1, 3]))


# ---------------------------------------------------------------- properties

tables = st.integers(2, 9).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.integers(0, n - 1), min_size=n, max_size=n),
                        st.lists(st.integers(0, n - 1), min_size=n, max_size=n),
                        st.lists(st.integers(0, n - 1), min_size=n, max_size=n)))


@settings(max_examples=60, deadline=None)
@given(tables)
def test_composition_profile_inequality(data):
    n, t1, t2, _ = data
    X = P(n)
    f, g = PointMap(X, X, np.array(t1)), PointMap(X, X, np.array(t2))
    pf, pg, pfg = expansion_profile(f), expansion_profile(g), expansion_profile(compose(f, g))
    for R in range(X.diameter + 1):
        assert pfg(R) <= pf(pg(R))
    assert list(pfg.entries) == pair_scan(compose(f, g))


@settings(max_examples=60, deadline=None)
@given(tables)
def test_closeness_is_pseudometric(data):
    n, t1, t2, t3 = data
    X = P(n)
    f, g, h = (PointMap(X, X, np.array(t)) for t in (t1, t2, t3))
    assert closeness_constant(f, g) == closeness_constant(g, f)
    assert closeness_constant(f, h) <= closeness_constant(f, g) + closeness_constant(g, h)
    C = closeness_constant(f, g)
    pf, pg = expansion_profile(f), expansion_profile(g)
    for R in range(n):
        assert pf(R) <= pg(R) + 2 * C
