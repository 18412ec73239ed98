"""Word metrics on balls in finitely generated groups.

Group elements are either integer matrices (stored as flat int tuples of a
square shape) or permutations (tuples of images).  Both multiply exactly in
pure Python, so free-group matrix entries may grow without overflow.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class GeneratingSet:
    kind: str  # "matrix" or "permutation"
    size: int  # matrix side or permutation degree
    elements: tuple[tuple[int, ...], ...]

    def identity(self) -> tuple[int, ...]:
        if self.kind == "matrix":
            return tuple(int(i == j) for i in range(self.size) for j in range(self.size))
        return tuple(range(self.size))

    def multiply(self, g, h):
        if self.kind == "matrix":
            m = self.size
            return tuple(
                sum(g[i * m + t] * h[t * m + j] for t in range(m))
                for i in range(m)
                for j in range(m)
            )
        # (g h)(i) = g(h(i))
        return tuple(g[h[i]] for i in range(self.size))

    def inverse_index(self) -> list[int]:
        ident = self.identity()
        lookup = {e: i for i, e in enumerate(self.elements)}
        inv = []
        for g in self.elements:
            match = [lookup[h] for h in self.elements if self.multiply(g, h) == ident]
            inv.append(match[0])
        return inv

    def to_json(self) -> dict:
        return {"kind": self.kind, "size": self.size, "elements": [list(e) for e in self.elements]}


def _matrix(rows) -> tuple[int, ...]:
    return tuple(int(v) for row in rows for v in row)


def _zd(d: int) -> GeneratingSet:
    gens = []
    for i in range(d):
        for s in (1, -1):
            m = np.eye(d + 1, dtype=int)
            m[i, d] = s
            gens.append(_matrix(m))
    return GeneratingSet("matrix", d + 1, tuple(gens))


def _free2() -> GeneratingSet:
    # Sanov's matrices generate a free group of rank 2.
    a, a_inv = [[1, 2], [0, 1]], [[1, -2], [0, 1]]
    b, b_inv = [[1, 0], [2, 1]], [[1, 0], [-2, 1]]
    return GeneratingSet("matrix", 2, tuple(_matrix(m) for m in (a, a_inv, b, b_inv)))


def _heisenberg() -> GeneratingSet:
    x, x_inv = [[1, 1, 0], [0, 1, 0], [0, 0, 1]], [[1, -1, 0], [0, 1, 0], [0, 0, 1]]
    y, y_inv = [[1, 0, 0], [0, 1, 1], [0, 0, 1]], [[1, 0, 0], [0, 1, -1], [0, 0, 1]]
    return GeneratingSet("matrix", 3, tuple(_matrix(m) for m in (x, x_inv, y, y_inv)))


def _sym(n: int) -> GeneratingSet:
    gens = []
    for i in range(n - 1):
        p = list(range(n))
        p[i], p[i + 1] = p[i + 1], p[i]
        gens.append(tuple(p))
    return GeneratingSet("permutation", n, tuple(gens))


PRESETS = {
    "Z1": lambda: _zd(1),
    "Z2": lambda: _zd(2),
    "Z3": lambda: _zd(3),
    "free2": _free2,
    "heisenberg": _heisenberg,
    "sym4": lambda: _sym(4),
}


def preset(name: str) -> GeneratingSet:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValidationError(f"unknown Cayley preset {name!r}; choose from {sorted(PRESETS)}") from None


def generating_set(kind: str, elements) -> GeneratingSet:
    """Build and validate a user-supplied generating set.

    Matrices are given as nested lists, permutations as image lists.
    """
    elements = [list(e) for e in elements]
    if not elements:
        raise ValidationError("generating set is empty")
    if kind == "matrix":
        arrs = [np.asarray(e) for e in elements]
        m = arrs[0].shape[0]
        for a in arrs:
            if a.shape != (m, m):
                raise ValidationError("matrix generators must be square and share one shape")
            if not np.issubdtype(a.dtype, np.integer):
                raise ValidationError("matrix generators must have integer entries")
            if round(abs(np.linalg.det(a))) != 1:
                raise ValidationError("matrix generators must be unimodular")
        gens = GeneratingSet("matrix", m, tuple(_matrix(a) for a in arrs))
    elif kind == "permutation":
        m = len(elements[0])
        for p in elements:
            if len(p) != m or sorted(p) != list(range(m)):
                raise ValidationError(f"{p} is not a permutation of 0..{m - 1}")
        gens = GeneratingSet("permutation", m, tuple(tuple(int(v) for v in p) for p in elements))
    else:
        raise ValidationError(f"unknown generator kind {kind!r}")
    _check_symmetric(gens)
    return gens


def _check_symmetric(gens: GeneratingSet) -> None:
    ident = gens.identity()
    if ident in gens.elements:
        raise ValidationError("generating set contains the identity")
    if len(set(gens.elements)) != len(gens.elements):
        raise ValidationError("generating set has repeated elements")
    members = set(gens.elements)
    for g in gens.elements:
        if not any(gens.multiply(g, h) == ident for h in members):
            raise ValidationError(f"generating set is not symmetric: inverse of {g} missing")


def word_ball(gens: GeneratingSet, radius: int):
    """Breadth-first search from the identity out to ``radius``.

    Returns elements in BFS order with their word lengths and a shortest word
    (as generator indices) for each.
    """
    ident = gens.identity()
    order = [ident]
    length = {ident: 0}
    word = {ident: ()}
    queue = deque([ident])
    while queue:
        g = queue.popleft()
        if length[g] == radius:
            continue
        for idx, s in enumerate(gens.elements):
            h = gens.multiply(g, s)
            if h not in length:
                length[h] = length[g] + 1
                word[h] = word[g] + (idx,)
                order.append(h)
                queue.append(h)
    return order, length, word


def cayley_ball_metric(gens: GeneratingSet, radius: int):
    """Induced word metric on the ball of the given radius.

    Distances d(g, h) = |g^-1 h| are read off a BFS ball of twice the radius,
    so in-ball shortest paths that leave the ball are still seen.
    """
    _check_symmetric(gens)
    big_order, big_length, _ = word_ball(gens, 2 * radius)
    points = [g for g in big_order if big_length[g] <= radius]
    _, _, words = word_ball(gens, radius)
    inv_idx = gens.inverse_index()
    inverses = []
    for g in points:
        inv = gens.identity()
        for idx in reversed(words[g]):
            inv = gens.multiply(inv, gens.elements[inv_idx[idx]])
        inverses.append(inv)
    n = len(points)
    dist = np.zeros((n, n), dtype=np.int32)
    for i in range(n):
        gi = inverses[i]
        for j in range(i + 1, n):
            d = big_length[gens.multiply(gi, points[j])]
            dist[i, j] = dist[j, i] = d
    return points, dist
