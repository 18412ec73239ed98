"""The shipped corpus: coarse-equivalence families, unitaries and sparsification instances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .categories import CoarseMorphismClass
from .maps import PointMap, identity_map
from .metric import FiniteMetricSpace, Recipe, build_space
from .rigidity import covering_unitary
from .sparsify import MassDistribution, uniform_mass, vector_mass
from .unitary import FiniteUnitary, identity_unitary, permutation_unitary, random_unitary

FAMILY_INDICES = (8, 16, 32, 64)
PATH = Recipe("path")
GRID = Recipe("grid", dim=2)
KGRID = Recipe("kgrid", dim=2)


@dataclass
class CorpusFamily:
    name: str
    morphisms: CoarseMorphismClass
    block_diameter: int


def _path(n: int) -> FiniteMetricSpace:
    return build_space(PATH, n)


def pair_swap(X: FiniteMetricSpace) -> PointMap:
    """2i <-> 2i+1; a bijection at distance 1 from the identity."""
    t = np.arange(X.n) ^ 1
    t[t >= X.n] = X.n - 1
    return PointMap(X, X, t)


def doubling(n: int) -> PointMap:
    return PointMap(_path(n), _path(2 * n), 2 * np.arange(n))


def halving(n: int) -> PointMap:
    return PointMap(_path(2 * n), _path(n), np.arange(2 * n) // 2)


def coarse_families(indices=FAMILY_INDICES) -> list[CorpusFamily]:
    def cls(build):
        return CoarseMorphismClass({i: build(i) for i in indices})

    return [
        CorpusFamily("identity-path", cls(lambda i: identity_map(_path(i))), 0),
        CorpusFamily("swap-path", cls(lambda i: pair_swap(_path(i))), 0),
        CorpusFamily("doubling-path", cls(doubling), 1),
        CorpusFamily("halving-path", cls(halving), 0),
        CorpusFamily("kgrid2-to-grid2",
                     cls(lambda i: identity_map(build_space(KGRID, i), build_space(GRID, i))), 0),
        CorpusFamily("grid2-to-kgrid2",
                     cls(lambda i: identity_map(build_space(GRID, i), build_space(KGRID, i))), 0),
    ]


def corpus_unitaries() -> list[FiniteUnitary]:
    """Ten small unitaries of assorted kinds: Haar, permutation, covering, identity."""
    p8, p16 = _path(8), _path(16)
    g4 = build_space(GRID, 4)
    z2 = build_space(Recipe("cayley", preset="Z2"), 2)
    rev = PointMap(p16, p16, np.arange(16)[::-1])
    return [
        random_unitary(p8, k=1, seed=1),
        random_unitary(p16, k=2, seed=2),
        random_unitary(g4, k=1, seed=3),
        random_unitary(z2, k=2, seed=4),
        permutation_unitary(rev),
        permutation_unitary(pair_swap(p16), k=2),
        covering_unitary(doubling(8), 1, seed=5).unitary,
        covering_unitary(halving(8), 0, seed=6).unitary,
        covering_unitary(identity_map(g4), 1, seed=7).unitary,
        identity_unitary(z2, k=3),
    ]


SPARSIFY_SPACES = (
    (PATH, 6), (PATH, 8), (PATH, 10), (PATH, 12),
    (GRID, 3), (KGRID, 3),
    (Recipe("tree", branching=2), 2),
    (Recipe("cayley", preset="Z2"), 1), (Recipe("cayley", preset="free2"), 1),
)


def sparsification_instances(seed: int = 0) -> list[tuple[MassDistribution, float, int]]:
    """Uniform and vector-derived masses on spaces of at most 12 points,
    crossed with kappa in {0.25, 0.5, 0.75} and S in {1, 2}."""
    rng = np.random.default_rng(seed)
    out = []
    for recipe, size in SPARSIFY_SPACES:
        X = build_space(recipe, size)
        xi = rng.standard_normal(X.n) + 1j * rng.standard_normal(X.n)
        U = random_unitary(X, seed=int(rng.integers(1 << 30)))
        masses = [uniform_mass(X), vector_mass(X, xi / np.linalg.norm(xi)), vector_mass(X, U.column(0))]
        for mu in masses:
            for kappa in (0.25, 0.5, 0.75):
                for S in (1, 2):
                    out.append((mu, kappa, S))
    return out
