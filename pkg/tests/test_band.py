from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coarsekit.band import (BandOperator, SubsetProjection, adjoint, compress, identity, operator_from_json,
                            operator_norm, orthogonal_sum_probe, random_band, rank_one_unit, shift, zero)
from coarsekit.errors import DenseLimitError, NonOrthogonalFamily, ValidationError
from coarsekit.metric import Recipe, build_space

PATH = Recipe("path")
GRID = Recipe("grid", dim=2)


def dense_propagation(X, k, M):
    """Oracle: scan every block of the dense matrix."""
    best = 0
    for x in range(X.n):
        for y in range(X.n):
            if np.abs(M[x * k:(x + 1) * k, y * k:(y + 1) * k]).max() > 0:
                best = max(best, int(X.dist[x, y]))
    return best


def test_propagation_examples():
    X = build_space(PATH, 6)
    assert identity(X).propagation == 0
    assert shift(X).propagation == 1 == dense_propagation(X, 1, shift(X).to_dense())
    assert rank_one_unit(X, 0, [1], 5, [1]).propagation == 5
    assert zero(X).propagation == 0


def test_rectangular_propagation_rejected():
    T = zero(build_space(PATH, 3), 1, build_space(PATH, 4))
    with pytest.raises(ValidationError):
        T.propagation


def test_shift_times_adjoint_drops_an_endpoint():
    X = build_space(PATH, 6)
    S = shift(X)
    dense = S.to_dense() @ S.to_dense().conj().T
    assert np.allclose((S @ S.H).to_dense(), dense, atol=1e-12)
    assert np.allclose(np.diag(dense), [0, 1, 1, 1, 1, 1])
    assert (S @ S.H).propagation == 0


def test_sum_with_negative_is_zero():
    T = random_band(build_space(GRID, 3), 2, 0.7, k=2, seed=4)
    Z = T + (-T)
    assert Z.is_zero() and Z.propagation == 0


def test_adjoint_of_rank_one_unit():
    X = build_space(PATH, 5)
    v, w = np.array([1, 2j]), np.array([0.5, -1])
    e = rank_one_unit(X, 1, v, 3, w)
    assert adjoint(e).allclose(rank_one_unit(X, 3, w, 1, v))


def test_incompatible_operands_rejected():
    a = identity(build_space(PATH, 3))
    b = identity(build_space(PATH, 4))
    with pytest.raises(ValidationError):
        a + b
    with pytest.raises(ValidationError):
        a @ identity(build_space(PATH, 3), k=2)


def test_small_blocks_pruned():
    X = build_space(PATH, 3)
    T = identity(X).scale(1e-15)
    assert T.is_zero()


def test_compress_examples():
    X = build_space(PATH, 6)
    S = shift(X)
    whole = SubsetProjection.whole(X)
    assert compress(whole, S, whole).allclose(S)
    A, B = SubsetProjection(X, [0, 1, 2]), SubsetProjection(X, [4, 5])
    assert compress(A, S, B).is_zero()
    dense = S.to_dense()
    mask_a, mask_b = A.mask(), B.mask()
    assert not (dense[np.ix_(mask_a, mask_b)]).any()


def test_compress_keeps_exactly_the_ab_blocks():
    X = build_space(GRID, 4)
    T = random_band(X, 3, 0.6, k=2, seed=9)
    A, B = SubsetProjection(X, [0, 3, 5, 9]), SubsetProjection(X, [1, 3, 15])
    C = compress(A, T, B)
    for (x, y), blk in T.blocks.items():
        if x in A.members and y in B.members:
            assert np.allclose(C.blocks[(x, y)], blk)
        else:
            assert (x, y) not in C.blocks


def test_norm_examples():
    X = build_space(PATH, 4)
    v, w = np.array([3.0, 4.0]), np.array([1.0, 1j])
    assert operator_norm(rank_one_unit(X, 0, v, 2, w)) == pytest.approx(5 * np.sqrt(2), rel=1e-12)
    assert operator_norm(identity(X, 3)) == pytest.approx(1.0, rel=1e-12)
    assert operator_norm(zero(X)) == 0.0


@pytest.mark.parametrize("seed", range(8))
def test_norm_matches_svd(seed):
    X = build_space(GRID, 5)
    T = random_band(X, seed % 4, 0.5, k=1 + seed % 2, seed=seed)
    assert abs(operator_norm(T) - np.linalg.norm(T.to_dense(), 2)) <= 1e-9 * max(1, operator_norm(T))


def test_norm_dense_limit():
    X = build_space(PATH, 50)
    with pytest.raises(DenseLimitError):
        operator_norm(identity(X, 2), dense_limit=64)


def test_random_band_contract():
    X = build_space(GRID, 4)
    D0 = random_band(X, 0, 1.0, k=2, seed=1)
    assert all(x == y for x, y in D0.blocks)
    full = random_band(X, X.diameter, 1.0, seed=2)
    assert full.nnz_blocks == X.n * X.n
    a, b = random_band(X, 2, 0.5, k=2, seed=7), random_band(X, 2, 0.5, k=2, seed=7)
    assert a.allclose(b, atol=0) and a.blocks.keys() == b.blocks.keys()
    T = random_band(X, 2, 0.5, seed=3)
    assert all(X.dist[x, y] <= 2 for x, y in T.blocks)
    data = T.matrix.data
    assert (data.real >= 0).all() and (data.real < 1).all() and (data.imag >= 0).all() and (data.imag < 1).all()


def test_operator_json_round_trip():
    X = build_space(PATH, 5)
    T = random_band(X, 1, 0.8, k=2, seed=5)
    back = operator_from_json(json.loads(json.dumps(T.to_json())), {X.label: X})
    assert back.allclose(T, atol=0)


def test_orthogonal_probe_disjoint_units():
    X = build_space(PATH, 8)
    fam = [rank_one_unit(X, 0, [1], 1, [1]), rank_one_unit(X, 2, [1], 3, [1]), rank_one_unit(X, 5, [1], 4, [1])]
    rep = orthogonal_sum_probe(fam, SubsetProjection(X, [0]), SubsetProjection(X, [6, 7]))
    assert rep.s_star == 1 and rep.applicable and rep.passed


def test_orthogonal_probe_rejects_shared_column():
    X = build_space(PATH, 8)
    fam = [rank_one_unit(X, 0, [1], 3, [1]), rank_one_unit(X, 1, [1], 3, [1])]
    with pytest.raises(NonOrthogonalFamily) as info:
        orthogonal_sum_probe(fam, SubsetProjection(X, [0]), SubsetProjection(X, [7]))
    assert info.value.pair == (0, 1)


def test_orthogonal_probe_random_family_on_grid():
    X = build_space(GRID, 8)
    rng = np.random.default_rng(0)
    rows = rng.permutation(X.n)[:20]
    cols = rng.permutation(X.n)[:20]
    fam = [rank_one_unit(X, int(x), [1], int(y), [1]) for x, y in zip(rows, cols)]
    s_star = max(T.propagation for T in fam)
    # A, B: two points at distance s_star + 1 if available, else far corners
    far = np.argwhere(X.dist == min(s_star + 1, X.diameter))
    a, b = far[0]
    A, B = SubsetProjection(X, X.ball(a, 0)), SubsetProjection(X, X.ball(b, 0))
    rep = orthogonal_sum_probe(fam, A, B)
    assert rep.passed
    if rep.applicable:
        for T in fam:
            assert not T.to_dense()[np.ix_(A.mask(), B.mask())].any()


# ---------------------------------------------------------------- properties

ops = st.tuples(st.integers(2, 5), st.integers(0, 4), st.floats(0.1, 1.0), st.integers(1, 2),
                st.integers(0, 2**31 - 1))


@settings(max_examples=40, deadline=None)
@given(ops, ops)
def test_propagation_algebra_against_dense(p, q):
    side = p[0]
    X = build_space(GRID, side)
    k = p[3]
    T = random_band(X, p[1], p[2], k=k, seed=p[4])
    S = random_band(X, q[1], q[2], k=k, seed=q[4])
    Td, Sd = T.to_dense(), S.to_dense()
    assert np.abs((T + S).to_dense() - (Td + Sd)).max() <= 1e-12
    assert np.abs((T @ S).to_dense() - Td @ Sd).max() <= 1e-12
    assert np.abs(T.H.to_dense() - Td.conj().T).max() <= 1e-12
    assert (T + S).propagation <= max(T.propagation, S.propagation)
    assert (T @ S).propagation <= T.propagation + S.propagation
    assert T.H.propagation == T.propagation == dense_propagation(X, k, Td)


@settings(max_examples=30, deadline=None)
@given(ops, st.integers(0, 2**31 - 1))
def test_compression_vanishes_and_shrinks_norm(p, seed):
    X = build_space(GRID, p[0])
    T = random_band(X, p[1], p[2], k=p[3], seed=p[4])
    rng = np.random.default_rng(seed)
    A = SubsetProjection(X, np.flatnonzero(rng.random(X.n) < 0.4))
    B = SubsetProjection(X, np.flatnonzero(rng.random(X.n) < 0.4))
    C = compress(A, T, B)
    if X.set_distance(A.members, B.members) > T.propagation:
        assert C.is_zero()
    assert operator_norm(C) <= operator_norm(T) + 1e-10
