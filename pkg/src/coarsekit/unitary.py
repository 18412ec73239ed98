"""Unitaries between l2(X) (x) C^k and l2(Y) (x) C^k', and tables of matrix-unit images."""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np
import scipy.sparse as sp

from . import _blocks
from .band import BandOperator
from .errors import RecoveryError, ValidationError
from .maps import PointMap
from .metric import FiniteMetricSpace

UNITARY_TOL = 1e-10
DENSE_JSON_LIMIT = 1024  # rows; larger unitaries serialize in coordinate form


@dataclass(frozen=True, eq=False)
class FiniteUnitary:
    """Column ``x*k_dom + i`` is the image of delta_x (x) e_i.

    Stored sparse: the covering unitaries of large truncations are block
    diagonal and would not fit in memory as dense arrays.
    """

    domain: FiniteMetricSpace
    codomain: FiniteMetricSpace
    k_dom: int
    k_cod: int
    matrix: sp.csr_array
    check: bool = True
    tol: float = UNITARY_TOL

    def __post_init__(self):
        M = _blocks.as_csr(self.matrix)
        shape = (self.codomain.n * self.k_cod, self.domain.n * self.k_dom)
        if M.shape != shape:
            raise ValidationError(f"unitary has shape {M.shape}, expected {shape}")
        if shape[0] != shape[1]:
            raise ValidationError(
                f"dimension mismatch: {self.codomain.n}*{self.k_cod} != {self.domain.n}*{self.k_dom}")
        object.__setattr__(self, "matrix", M)
        if self.check:
            err = unitarity_defect(M)
            if err > self.tol:
                raise ValidationError(f"matrix is not unitary (defect {err:.3e})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @functools.cached_property
    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @functools.cached_property
    def csc(self) -> sp.csc_array:
        return self.matrix.tocsc()

    def column(self, x: int, i: int = 0) -> np.ndarray:
        return self.csc[:, [x * self.k_dom + i]].toarray().ravel()

    def apply(self, vec) -> np.ndarray:
        return self.matrix @ np.asarray(vec, dtype=np.complex128)

    def adjoint(self) -> "FiniteUnitary":
        return FiniteUnitary(self.codomain, self.domain, self.k_cod, self.k_dom,
                             self.matrix.conj().T, check=False)

    def compose(self, other: "FiniteUnitary") -> "FiniteUnitary":
        """self after other."""
        if not (other.codomain.same_as(self.domain) and other.k_cod == self.k_dom):
            raise ValidationError("unitaries are not composable")
        return FiniteUnitary(other.domain, self.codomain, other.k_dom, self.k_cod,
                             self.matrix @ other.matrix, check=False)

    def as_band(self, prune_tol: float = 1e-14) -> BandOperator:
        return BandOperator(self.codomain, self.domain, self.k_cod, self.k_dom, self.matrix, prune_tol)

    def to_json(self) -> dict:
        doc = {"domain": self.domain.label, "codomain": self.codomain.label,
               "k_dom": self.k_dom, "k_cod": self.k_cod}
        if self.dim <= DENSE_JSON_LIMIT:
            d = self.dense
            doc["re"] = d.real.tolist()
            doc["im"] = d.imag.tolist()
        else:
            coo = self.matrix.tocoo()
            doc["coo"] = {"row": coo.row.tolist(), "col": coo.col.tolist(),
                          "re": coo.data.real.tolist(), "im": coo.data.imag.tolist()}
        return doc


def unitarity_defect(M) -> float:
    M = sp.csr_array(M)
    n = M.shape[0]
    G = (M.conj().T @ M - sp.eye_array(n, dtype=np.complex128)).tocoo()
    return float(np.abs(G.data).max()) if G.nnz else 0.0


def unitary_from_json(doc: Any, spaces: Mapping[str, FiniteMetricSpace],
                      tol: float = UNITARY_TOL) -> FiniteUnitary:
    if not isinstance(doc, Mapping):
        raise ValidationError("unitary document must be a JSON object")
    for key in ("domain", "codomain", "k_dom", "k_cod"):
        if key not in doc:
            raise ValidationError(f"unitary document missing {key!r}")
    try:
        X, Y = spaces[doc["domain"]], spaces[doc["codomain"]]
    except KeyError as exc:
        raise ValidationError(f"unknown space label {exc.args[0]!r}") from None
    shape = (Y.n * int(doc["k_cod"]), X.n * int(doc["k_dom"]))
    try:
        if "coo" in doc:
            c = doc["coo"]
            data = np.asarray(c["re"], float) + 1j * np.asarray(c["im"], float)
            M = sp.coo_array((data, (np.asarray(c["row"], int), np.asarray(c["col"], int))), shape=shape)
        elif "re" in doc and "im" in doc:
            M = np.asarray(doc["re"], float) + 1j * np.asarray(doc["im"], float)
        else:
            raise ValidationError("unitary document needs 're'/'im' or 'coo'")
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed unitary matrix: {exc}") from None
    return FiniteUnitary(X, Y, int(doc["k_dom"]), int(doc["k_cod"]), sp.csr_array(M, shape=shape), tol=tol)


# ----------------------------------------------------------- constructors

def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary: QR of a complex Gaussian with the phase fix."""
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def random_unitary(X: FiniteMetricSpace, k: int = 1, seed: int = 0,
                   Y: FiniteMetricSpace | None = None, k_cod: int | None = None) -> FiniteUnitary:
    Y = X if Y is None else Y
    k_cod = k if k_cod is None else k_cod
    rng = np.random.default_rng(seed)
    return FiniteUnitary(X, Y, k, k_cod, sp.csr_array(haar_unitary(X.n * k, rng)))


def permutation_unitary(f: PointMap, k: int = 1, phases=None) -> FiniteUnitary:
    """delta_x (x) e_i -> phase * delta_{f(x)} (x) e_i for a bijection f."""
    if len(set(f.table.tolist())) != f.domain.n or f.domain.n != f.codomain.n:
        raise ValidationError("permutation unitary needs a bijection")
    n = f.domain.n
    cols = np.arange(n * k)
    rows = (f.table[:, None] * k + np.arange(k)[None, :]).ravel()
    data = np.ones(n * k, dtype=np.complex128) if phases is None else np.asarray(phases, np.complex128)
    M = sp.coo_array((data, (rows, cols)), shape=(n * k, n * k))
    return FiniteUnitary(f.domain, f.codomain, k, k, sp.csr_array(M))


def identity_unitary(X: FiniteMetricSpace, k: int = 1) -> FiniteUnitary:
    return FiniteUnitary(X, X, k, k, sp.csr_array(sp.eye_array(X.n * k, dtype=np.complex128)))


# -------------------------------------------------------- isomorphism tables

@dataclass(frozen=True, eq=False)
class IsomorphismTable:
    """Images phi(e_ab) of the scalar matrix units of l2(X) (x) C^k.

    ``a = x*k + i`` indexes the basis vector delta_x (x) e_i.  Images are dense
    ``dim x dim`` matrices on the codomain; ``image_fn`` is queried lazily.
    """

    domain: FiniteMetricSpace
    codomain: FiniteMetricSpace
    k_dom: int
    k_cod: int
    image_fn: Callable[[int, int], np.ndarray]
    row_fn: Callable[[int], np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.domain.n * self.k_dom

    def image(self, a: int, b: int) -> np.ndarray:
        return self.image_fn(a, b)

    def images_row(self, a: int) -> np.ndarray:
        """Stacked images phi(e_ab) for all b, shape (dim, dim_cod, dim_cod)."""
        if self.row_fn is not None:
            return self.row_fn(a)
        return np.stack([self.image_fn(a, b) for b in range(self.dim)])

    def image_operator(self, a: int, b: int) -> BandOperator:
        M = sp.csr_array(self.image(a, b))
        return BandOperator(self.codomain, self.codomain, self.k_cod, self.k_cod, M)

    @classmethod
    def conjugation(cls, V: FiniteUnitary) -> "IsomorphismTable":
        Vd = V.dense
        Vh = Vd.conj()

        def image(a, b):
            return np.outer(Vd[:, a], Vh[:, b])

        def row(a):
            return Vd[None, :, a, None] * Vh.T[:, None, :]

        return cls(V.domain, V.codomain, V.k_dom, V.k_cod, image, row)

    @classmethod
    def from_images(cls, domain, codomain, k_dom, k_cod,
                    images: Mapping[tuple[int, int], np.ndarray]) -> "IsomorphismTable":
        dim = domain.n * k_dom
        missing = [(a, b) for a in range(dim) for b in range(dim) if (a, b) not in images]
        if missing:
            raise ValidationError(f"table incomplete: no image for generator {missing[0]}")
        frozen = {key: np.asarray(v, dtype=np.complex128) for key, v in images.items()}
        return cls(domain, codomain, k_dom, k_cod, lambda a, b: frozen[a, b])


def check_compatibility(table: IsomorphismTable, samples: int = 200, seed: int = 0,
                        tol: float = UNITARY_TOL) -> None:
    """Sampled *-homomorphism checks on matrix units; raises with the first witness."""
    rng = np.random.default_rng(seed)
    dim = table.dim
    for _ in range(samples):
        a, b, c, d = (int(v) for v in rng.integers(0, dim, 4))
        prod = table.image(a, b) @ table.image(c, d)
        want = table.image(a, d) if b == c else np.zeros_like(prod)
        if np.abs(prod - want).max() > tol:
            raise RecoveryError("phi(e_ab) phi(e_cd) != delta_bc phi(e_ad)", witness=(a, b, c, d))
        if np.abs(table.image(a, b).conj().T - table.image(b, a)).max() > tol:
            raise RecoveryError("phi(e_ab)* != phi(e_ba)", witness=(a, b))
