"""Finite-propagation block matrices over finite metric spaces.

A ``BandOperator`` is stored as one scalar CSR matrix of shape
``(n_row * k_row, n_col * k_col)``; the ``k_row x k_col`` block at ``(x, y)``
sits at rows ``x*k_row ..`` and columns ``y*k_col ..``.  Blocks whose largest
entry falls below ``PRUNE_TOL`` are dropped after every operation.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

from . import _blocks
from .errors import DenseLimitError, NonOrthogonalFamily, ValidationError
from .metric import FiniteMetricSpace

PRUNE_TOL = 1e-14
DENSE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class BandOperator:
    row_space: FiniteMetricSpace
    col_space: FiniteMetricSpace
    k_row: int
    k_col: int
    matrix: sp.csr_array
    prune_tol: float = PRUNE_TOL

    def __post_init__(self):
        if self.k_row < 1 or self.k_col < 1:
            raise ValidationError("fiber dimensions must be positive")
        shape = (self.row_space.n * self.k_row, self.col_space.n * self.k_col)
        if tuple(self.matrix.shape) != shape:
            raise ValidationError(f"matrix shape {self.matrix.shape} does not match {shape}")
        M = _blocks.prune_blocks(self.matrix, self.k_row, self.k_col, self.prune_tol)
        object.__setattr__(self, "matrix", M)

    # -- structure
    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def is_square(self) -> bool:
        return self.row_space.same_as(self.col_space) and self.k_row == self.k_col

    @functools.cached_property
    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Block coordinates (x, y) of every stored block, sorted."""
        xs, ys = _blocks.block_pattern(self.matrix, self.k_row, self.k_col)
        order = np.lexsort((ys, xs))
        return xs[order], ys[order]

    @functools.cached_property
    def blocks(self) -> dict[tuple[int, int], np.ndarray]:
        out = {}
        for x, y in zip(*self.support):
            out[int(x), int(y)] = self.block(int(x), int(y))
        return out

    def block(self, x: int, y: int) -> np.ndarray:
        r = slice(x * self.k_row, (x + 1) * self.k_row)
        c = slice(y * self.k_col, (y + 1) * self.k_col)
        return self.matrix[r, c].toarray()

    @property
    def nnz_blocks(self) -> int:
        return len(self.support[0])

    def is_zero(self) -> bool:
        return self.matrix.nnz == 0

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @functools.cached_property
    def propagation(self) -> int:
        if not self.is_square:
            raise ValidationError("propagation needs an operator on a single space with one fiber")
        xs, ys = self.support
        if xs.size == 0:
            return 0
        return int(self.row_space.dist[xs, ys].max())

    # -- algebra
    def __add__(self, other: "BandOperator") -> "BandOperator":
        return add(self, other)

    def __sub__(self, other: "BandOperator") -> "BandOperator":
        return add(self, other.scale(-1.0))

    def __neg__(self) -> "BandOperator":
        return self.scale(-1.0)

    def __matmul__(self, other: "BandOperator") -> "BandOperator":
        return multiply(self, other)

    def scale(self, c: complex) -> "BandOperator":
        return self._like(self.matrix * c)

    @property
    def H(self) -> "BandOperator":
        return adjoint(self)

    def _like(self, M) -> "BandOperator":
        return BandOperator(self.row_space, self.col_space, self.k_row, self.k_col, _blocks.as_csr(M))

    def allclose(self, other: "BandOperator", atol: float = 1e-12) -> bool:
        if self.shape != other.shape:
            return False
        diff = (self.matrix - other.matrix).tocoo()
        return diff.nnz == 0 or float(np.abs(diff.data).max()) <= atol

    def to_json(self) -> dict:
        blocks = []
        for (x, y), b in self.blocks.items():
            blocks.append({"x": x, "y": y, "re": b.real.tolist(), "im": b.imag.tolist()})
        return {"row_space": self.row_space.label, "col_space": self.col_space.label,
                "k_row": self.k_row, "k_col": self.k_col, "blocks": blocks}


def operator_from_blocks(row_space, col_space, k_row, k_col,
                         blocks: Mapping[tuple[int, int], np.ndarray]) -> BandOperator:
    rows, cols, vals = [], [], []
    for (x, y), b in blocks.items():
        b = np.asarray(b, dtype=np.complex128)
        if b.shape != (k_row, k_col):
            raise ValidationError(f"block ({x},{y}) has shape {b.shape}, expected {(k_row, k_col)}")
        if not (0 <= x < row_space.n and 0 <= y < col_space.n):
            raise ValidationError(f"block ({x},{y}) out of range")
        i, j = np.meshgrid(np.arange(k_row), np.arange(k_col), indexing="ij")
        rows.append((x * k_row + i).ravel())
        cols.append((y * k_col + j).ravel())
        vals.append(b.ravel())
    shape = (row_space.n * k_row, col_space.n * k_col)
    if rows:
        M = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
    else:
        M = sp.csr_array(shape, dtype=np.complex128)
    return BandOperator(row_space, col_space, k_row, k_col, _blocks.as_csr(M))


def operator_from_json(doc: Any, spaces: Mapping[str, FiniteMetricSpace]) -> BandOperator:
    if not isinstance(doc, Mapping):
        raise ValidationError("operator document must be a JSON object")
    for key in ("row_space", "col_space", "k_row", "k_col", "blocks"):
        if key not in doc:
            raise ValidationError(f"operator document missing {key!r}")
    try:
        X, Y = spaces[doc["row_space"]], spaces[doc["col_space"]]
    except KeyError as exc:
        raise ValidationError(f"unknown space label {exc.args[0]!r}") from None
    blocks = {}
    for b in doc["blocks"]:
        try:
            blocks[int(b["x"]), int(b["y"])] = np.asarray(b["re"], float) + 1j * np.asarray(b["im"], float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed block entry: {exc}") from None
    return operator_from_blocks(X, Y, int(doc["k_row"]), int(doc["k_col"]), blocks)


def zero(X: FiniteMetricSpace, k: int = 1, Y: FiniteMetricSpace | None = None, k_col: int | None = None):
    Y = X if Y is None else Y
    k_col = k if k_col is None else k_col
    return BandOperator(X, Y, k, k_col, sp.csr_array((X.n * k, Y.n * k_col), dtype=np.complex128))


def identity(X: FiniteMetricSpace, k: int = 1) -> BandOperator:
    return BandOperator(X, X, k, k, _blocks.as_csr(sp.eye_array(X.n * k, dtype=np.complex128)))


def rank_one_unit(X: FiniteMetricSpace, x: int, v, y: int, w, k: int | None = None) -> BandOperator:
    """e_{(x,v),(y,w)}: sends delta_y (x) w to delta_x (x) v, i.e. the block v w^H at (x, y)."""
    v = np.atleast_1d(np.asarray(v, dtype=np.complex128))
    w = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    if not v.any() or not w.any():
        raise ValidationError("rank-one unit needs non-zero vectors")
    k = v.size if k is None else k
    if v.size != k or w.size != k:
        raise ValidationError("fiber vectors must have length k")
    return operator_from_blocks(X, X, k, k, {(x, y): np.outer(v, w.conj())})


def matrix_unit(X: FiniteMetricSpace, x: int, i: int, y: int, j: int, k: int = 1) -> BandOperator:
    v = np.zeros(k)
    w = np.zeros(k)
    v[i] = w[j] = 1.0
    return rank_one_unit(X, x, v, y, w)


def shift(X: FiniteMetricSpace, k: int = 1) -> BandOperator:
    """Nearest-neighbour shift on a path: delta_x -> delta_{x+1}, last point killed."""
    n = X.n
    M = sp.coo_array((np.ones(max(n - 1, 0)), (np.arange(1, n), np.arange(n - 1))), shape=(n, n))
    return BandOperator(X, X, k, k, _blocks.as_csr(sp.kron(M, sp.eye_array(k))))


# ------------------------------------------------------------------ algebra

def _check_same(T: BandOperator, S: BandOperator) -> None:
    if not (T.row_space.same_as(S.row_space) and T.col_space.same_as(S.col_space)
            and T.k_row == S.k_row and T.k_col == S.k_col):
        raise ValidationError("operators are not defined on the same spaces and fibers")


def add(T: BandOperator, S: BandOperator) -> BandOperator:
    _check_same(T, S)
    return T._like(T.matrix + S.matrix)


def multiply(T: BandOperator, S: BandOperator) -> BandOperator:
    """T S (apply S first)."""
    if not (T.col_space.same_as(S.row_space) and T.k_col == S.k_row):
        raise ValidationError("operators are not composable")
    return BandOperator(T.row_space, S.col_space, T.k_row, S.k_col, _blocks.as_csr(T.matrix @ S.matrix))


def adjoint(T: BandOperator) -> BandOperator:
    return BandOperator(T.col_space, T.row_space, T.k_col, T.k_row, _blocks.as_csr(T.matrix.conj().T))


def propagation(T: BandOperator) -> int:
    return T.propagation


# --------------------------------------------------------------- projections

@dataclass(frozen=True, eq=False)
class SubsetProjection:
    space: FiniteMetricSpace
    members: tuple[int, ...]

    def __post_init__(self):
        m = tuple(sorted({int(v) for v in self.members}))
        if m and (m[0] < 0 or m[-1] >= self.space.n):
            raise ValidationError("projection members must be points of the space")
        object.__setattr__(self, "members", m)

    @classmethod
    def whole(cls, X: FiniteMetricSpace) -> "SubsetProjection":
        return cls(X, tuple(range(X.n)))

    def mask(self) -> np.ndarray:
        out = np.zeros(self.space.n, dtype=bool)
        out[list(self.members)] = True
        return out


def set_distance(A: SubsetProjection, B: SubsetProjection) -> float:
    return A.space.set_distance(A.members, B.members)


def compress(A: SubsetProjection, T: BandOperator, B: SubsetProjection) -> BandOperator:
    """chi_A T chi_B: keep exactly the blocks with row in A and column in B."""
    if not (A.space.same_as(T.row_space) and B.space.same_as(T.col_space)):
        raise ValidationError("projections do not live on the operator's spaces")
    coo = T.matrix.tocoo()
    keep = A.mask()[coo.row // T.k_row] & B.mask()[coo.col // T.k_col]
    M = sp.coo_array((coo.data[keep], (coo.row[keep], coo.col[keep])), shape=T.shape)
    return T._like(M)


# ---------------------------------------------------------------------- norm

def _start_vector(n: int) -> np.ndarray:
    # Deterministic and generic: not orthogonal to any coordinate direction.
    v = 1.0 + 0.5 * np.cos(np.arange(n) * 1.618) + 0.25j * np.sin(np.arange(n) * 2.718)
    return v / np.linalg.norm(v)


def operator_norm(T: BandOperator, rtol: float = 1e-12, max_iter: int = 2000,
                  dense_limit: int = DENSE_LIMIT) -> float:
    """Largest singular value by power iteration on T^H T.

    When plain power iteration has not met ``rtol`` after ``max_iter`` steps
    (nearly tied top singular values) the estimate is finished by Lanczos on
    the same operator.
    """
    if T.shape[0] > dense_limit:
        raise DenseLimitError(
            f"operator has {T.shape[0]} rows > dense limit {dense_limit}; compress it first")
    M = T.matrix
    if M.nnz == 0:
        return 0.0
    MH = M.conj().T.tocsr()
    v = _start_vector(M.shape[1])
    lam = 0.0
    for _ in range(max_iter):
        w = MH @ (M @ v)
        new = float(np.vdot(v, w).real)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= rtol * abs(new):
            # Rayleigh quotient at the refined vector
            return float(np.sqrt(max(np.linalg.norm(M @ v) ** 2, new)))
        lam = new
    n = M.shape[1]
    if n <= 2:
        return float(np.linalg.norm(M.toarray(), 2))
    op = spla.LinearOperator((n, n), matvec=lambda x: MH @ (M @ x), dtype=np.complex128)
    top = spla.eigsh(op, k=1, which="LA", tol=rtol, v0=v, return_eigenvectors=False)
    return float(np.sqrt(max(top[0], lam)))


# ------------------------------------------------------------------- corpus

def random_band(X: FiniteMetricSpace, prop_bound: int, density: float = 1.0, k: int = 1,
                seed: int = 0) -> BandOperator:
    """Seeded random operator: each pair with d(x,y) <= prop_bound carries a block
    with probability ``density``; entries have real and imaginary parts in [0, 1)."""
    if prop_bound < 0:
        raise ValidationError("prop_bound must be non-negative")
    if not 0 < density <= 1:
        raise ValidationError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    xs, ys = np.nonzero(X.dist <= prop_bound)
    keep = rng.random(xs.size) < density
    xs, ys = xs[keep], ys[keep]
    m = xs.size
    vals = rng.random((m, k, k)) + 1j * rng.random((m, k, k))
    i, j = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    rows = (xs[:, None, None] * k + i[None]).ravel()
    cols = (ys[:, None, None] * k + j[None]).ravel()
    M = sp.coo_array((vals.ravel(), (rows, cols)), shape=(X.n * k, X.n * k))
    return BandOperator(X, X, k, k, _blocks.as_csr(M))


# ----------------------------------------------------------- orthogonal sums

@dataclass
class OrthogonalSumReport:
    count: int
    s_star: int
    distance: float
    applicable: bool
    zero_compressions: list[bool]
    passed: bool

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "s_star": self.s_star,
            "distance": None if self.distance == float("inf") else self.distance,
            "applicable": self.applicable,
            "zero_compressions": self.zero_compressions,
            "passed": self.passed,
        }


def check_orthogonal(family: Sequence[BandOperator]) -> None:
    for i in range(len(family)):
        for j in range(i + 1, len(family)):
            Ti, Tj = family[i], family[j]
            _check_same(Ti, Tj)
            if not multiply(Ti, adjoint(Tj)).is_zero():
                raise NonOrthogonalFamily(i, j, "T_i T_j*")
            if not multiply(adjoint(Ti), Tj).is_zero():
                raise NonOrthogonalFamily(i, j, "T_i* T_j")


def orthogonal_sum_probe(family: Sequence[BandOperator], A: SubsetProjection,
                         B: SubsetProjection) -> OrthogonalSumReport:
    """Check pairwise orthogonality, then that every chi_A T_i chi_B vanishes
    once d(A, B) exceeds the largest propagation in the family."""
    family = list(family)
    check_orthogonal(family)
    s_star = max((T.propagation for T in family), default=0)
    dAB = set_distance(A, B)
    zeros = [compress(A, T, B).is_zero() for T in family]
    applicable = dAB > s_star
    return OrthogonalSumReport(len(family), s_star, dAB, applicable, zeros,
                               passed=(not applicable) or all(zeros))
