"""Spatial implementation, map extraction, covering unitaries and locality audits."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import _blocks
from .band import BandOperator
from .errors import CoveringError, ExtractionError, RecoveryError, ValidationError
from .maps import ControlFunction, PointMap, expansion_profile, stabilization_verdict, combine_verdicts
from .unitary import UNITARY_TOL, FiniteUnitary, IsomorphismTable, haar_unitary

SUPPORT_FLOOR = 1e-12
TIE_TOL = 1e-12
CERTIFIED = "CERTIFIED"
UNCERTIFIED = "UNCERTIFIED"


# ------------------------------------------------------------------ recovery

def generator_defect(U: FiniteUnitary, table: IsomorphismTable) -> float:
    """max over generators e_ab of the Frobenius norm of U e_ab U* - phi(e_ab)."""
    Ud = U.dense
    Uh = Ud.conj().T
    worst = 0.0
    for a in range(table.dim):
        ours = Ud[None, :, a, None] * Uh[:, None, :]
        diff = ours - table.images_row(a)
        worst = max(worst, float(np.sqrt((np.abs(diff) ** 2).sum(axis=(1, 2))).max()))
    return worst


def recover_unitary(table: IsomorphismTable, base: int = 0, tol: float = UNITARY_TOL) -> FiniteUnitary:
    """Intertwiner U with phi(e) = U e U*, unique up to a global phase.

    xi is a unit vector in the range of the rank-one projection phi(e_00)
    (its largest column), and U sends basis vector a to phi(e_a0) xi.
    """
    P = table.image(base, base)
    sv = np.linalg.svd(P, compute_uv=False)
    rank = int((sv > 1e-8 * max(1.0, sv[0])).sum()) if sv.size else 0
    if rank != 1:
        raise RecoveryError(f"phi(e_00) has rank {rank}, expected 1", witness=(base, base))
    j = int(np.argmax(np.linalg.norm(P, axis=0)))
    xi = P[:, j] / np.linalg.norm(P[:, j])
    cols = np.column_stack([table.image(a, base) @ xi for a in range(table.dim)])
    try:
        U = FiniteUnitary(table.domain, table.codomain, table.k_dom, table.k_cod, sp.csr_array(cols))
    except ValidationError as exc:
        raise RecoveryError(f"recovered operator is not unitary: {exc}") from None
    defect = generator_defect(U, table)
    if defect > tol:
        raise RecoveryError(f"generator defect {defect:.3e} exceeds {tol:.1e}")
    return U


# --------------------------------------------------------- coefficient formula

def _basis_vector(space_n: int, k: int, x: int, v) -> np.ndarray:
    out = np.zeros(space_n * k, dtype=np.complex128)
    out[x * k:(x + 1) * k] = np.asarray(v, dtype=np.complex128)
    return out


def coefficient_sides(U: FiniteUnitary, x1, v1, x2, v2, y1, w1, y2, w2) -> tuple[complex, complex]:
    """Both sides of the matrix-unit coefficient identity for phi = Ad U.

    Left: the (y1,w1),(y2,w2) coefficient of U e_{(x1,v1),(x2,v2)} U*, read off
    the assembled operator.  Right: <d_y1 w1, U d_x1 v1> <U d_x2 v2, d_y2 w2>.
    """
    z1 = _basis_vector(U.domain.n, U.k_dom, x1, v1)
    z2 = _basis_vector(U.domain.n, U.k_dom, x2, v2)
    e1 = _basis_vector(U.codomain.n, U.k_cod, y1, w1)
    e2 = _basis_vector(U.codomain.n, U.k_cod, y2, w2)
    E = sp.csr_array(np.outer(z1, z2.conj()))
    image = U.matrix @ E @ U.matrix.conj().T
    left = complex(np.vdot(e1, image @ e2))
    right = complex(np.vdot(e1, U.apply(z1)) * np.vdot(U.apply(z2), e2))
    return left, right


def coefficient_formula_check(U: FiniteUnitary, x1, v1, x2, v2, y1, w1, y2, w2) -> float:
    left, right = coefficient_sides(U, x1, v1, x2, v2, y1, w1, y2, w2)
    return abs(left - right)


def coefficient_formula_sweep(U: FiniteUnitary, count: int, seed: int = 0) -> float:
    """Max defect over ``count`` random tuples with random unit fiber vectors.

    Vectorised form of ``coefficient_formula_check`` for small unitaries:
    the left side is still evaluated on the assembled operator U E U*.
    """
    rng = np.random.default_rng(seed)
    Ud = U.dense
    nd, nc, kd, kc = U.domain.n, U.codomain.n, U.k_dom, U.k_cod

    def unit(k):
        v = rng.standard_normal((count, k)) + 1j * rng.standard_normal((count, k))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    x1, x2 = rng.integers(0, nd, count), rng.integers(0, nd, count)
    y1, y2 = rng.integers(0, nc, count), rng.integers(0, nc, count)
    v1, v2, w1, w2 = unit(kd), unit(kd), unit(kc), unit(kc)
    Uz1 = np.einsum("itj,tj->ti", Ud[:, x1[:, None] * kd + np.arange(kd)], v1)
    Uz2 = np.einsum("itj,tj->ti", Ud[:, x2[:, None] * kd + np.arange(kd)], v2)
    I1 = y1[:, None] * kc + np.arange(kc)
    I2 = y2[:, None] * kc + np.arange(kc)
    worst = 0.0
    step = max(1, 4_000_000 // max(1, Ud.shape[0] ** 2))
    for lo in range(0, count, step):
        sl = slice(lo, lo + step)
        t = np.arange(len(x1[sl]))
        image = Uz1[sl, :, None] * Uz2[sl, None, :].conj()  # U E U* for each tuple
        sub = image[t[:, None, None], I1[sl][:, :, None], I2[sl][:, None, :]]
        left = np.einsum("ti,tij,tj->t", w1[sl].conj(), sub, w2[sl])
        a = np.einsum("ti,ti->t", w1[sl].conj(), Uz1[sl][t[:, None], I1[sl]])
        b = np.einsum("ti,ti->t", Uz2[sl][t[:, None], I2[sl]].conj(), w2[sl])
        worst = max(worst, float(np.abs(left - a * b).max()))
    return worst


# ---------------------------------------------------------------- extraction

def column_block_norms(U: FiniteUnitary, v0: int = 0):
    """(y, x, ||U_yx e_v0||) over the structurally non-zero blocks."""
    if not 0 <= v0 < U.k_dom:
        raise ValidationError("v0 index outside the domain fiber")
    cols = np.arange(U.domain.n) * U.k_dom + v0
    sub = U.csc[:, cols].tocoo()
    agg = sp.coo_array((np.abs(sub.data) ** 2, (sub.row // U.k_cod, sub.col)),
                       shape=(U.codomain.n, U.domain.n))
    agg.sum_duplicates()
    return agg.row.astype(np.int64), agg.col.astype(np.int64), np.sqrt(agg.data)


@dataclass
class ThresholdExtraction:
    map: PointMap
    masses: np.ndarray
    c: float
    verdict: str
    worst_point: int | None

    @property
    def min_mass(self) -> float:
        return float(self.masses.min()) if self.masses.size else 1.0

    def to_json(self) -> dict:
        return {"map": self.map.to_json(), "masses": self.masses.tolist(), "c": self.c,
                "min_mass": self.min_mass, "verdict": self.verdict, "worst_point": self.worst_point}


def extract_map_threshold(U: FiniteUnitary, c: float = 0.1, v0: int = 0) -> ThresholdExtraction:
    """f(x) = argmax_y ||(U(delta_x (x) e_v0))(y)||, ties to the smallest y.

    CERTIFIED when every achieved maximum is at least ``c``.
    """
    if not 0 < c <= 1:
        raise ValidationError("threshold c must lie in (0, 1]")
    n = U.domain.n
    ys, xs, m = column_block_norms(U, v0)
    best = np.zeros(n)
    np.maximum.at(best, xs, m)
    near = m >= best[xs] - TIE_TOL
    table = np.full(n, U.codomain.n, dtype=np.int64)
    np.minimum.at(table, xs[near], ys[near])
    f = PointMap(U.domain, U.codomain, table)
    worst = int(np.argmin(best)) if n else None
    ok = n == 0 or best.min() >= c
    return ThresholdExtraction(f, best, c, CERTIFIED if ok else UNCERTIFIED, None if ok else worst)


def extract_map_support(U: FiniteUnitary, eta: float = SUPPORT_FLOOR, v0: int = 0) -> PointMap:
    """f(x) = smallest y whose block coefficient norm exceeds ``eta``."""
    if eta < 0:
        raise ValidationError("eta must be non-negative")
    n = U.domain.n
    ys, xs, m = column_block_norms(U, v0)
    keep = m > eta
    table = np.full(n, U.codomain.n, dtype=np.int64)
    np.minimum.at(table, xs[keep], ys[keep])
    missing = np.flatnonzero(table == U.codomain.n)
    if missing.size:
        x = int(missing[0])
        raise ExtractionError(f"no coefficient above {eta:g} in the column of point {x}", point=x)
    return PointMap(U.domain, U.codomain, table)


# ------------------------------------------------------------------ covering

@dataclass
class CoveringCertificate:
    C: int
    witnesses: list[tuple[int, int]] = field(default_factory=list)
    bound: int | None = None

    @property
    def holds(self) -> bool:
        return not self.witnesses

    def to_json(self) -> dict:
        return {"C": self.C, "bound": self.bound, "witnesses": [list(w) for w in self.witnesses]}


def verify_covers(U: FiniteUnitary, f: PointMap, bound: int | None = None,
                  floor: float = SUPPORT_FLOOR) -> CoveringCertificate:
    """C = max d(f(x), y) over blocks U_yx with Frobenius norm above ``floor``.

    With ``bound`` given, every block breaking it is listed as a witness.
    """
    if not (U.domain.same_as(f.domain) and U.codomain.same_as(f.codomain)):
        raise ValidationError("unitary and map act between different spaces")
    ys, xs = _blocks.block_pattern(U.matrix, U.k_cod, U.k_dom, floor)
    if ys.size == 0:
        return CoveringCertificate(0, [], bound)
    d = f.codomain.dist[f.table[xs], ys]
    C = int(d.max())
    witnesses = []
    if bound is not None:
        bad = np.flatnonzero(d > bound)
        order = np.lexsort((ys[bad], xs[bad]))
        witnesses = [(int(xs[bad][i]), int(ys[bad][i])) for i in order]
    return CoveringCertificate(C, witnesses, bound)


@dataclass
class Covering:
    unitary: FiniteUnitary
    certificate: CoveringCertificate
    pieces: list[list[int]]        # codomain pieces Y_n
    preimages: list[list[int]]     # X_n = f^-1(Y_n)
    block_diameter: int            # diameter bound actually used
    k_dom: int
    k_cod: int

    def to_json(self) -> dict:
        return {"certificate": self.certificate.to_json(), "pieces": self.pieces,
                "preimages": self.preimages, "block_diameter": self.block_diameter,
                "k_dom": self.k_dom, "k_cod": self.k_cod}


def _partition(f: PointMap, D: int) -> list[list[int]] | int:
    """Pieces of diameter <= D seeded at image points; returns an unplaced point on failure."""
    Y = f.codomain
    seeds = np.unique(f.table)
    piece_of = np.full(Y.n, -1, dtype=np.int64)
    piece_of[seeds] = np.arange(seeds.size)
    members = [[int(s)] for s in seeds]
    for y in np.flatnonzero(piece_of < 0):
        dseed = Y.dist[y, seeds]
        for p in np.lexsort((seeds, dseed)):
            if dseed[p] > D:
                break
            if Y.dist[y, members[p]].max() <= D:
                members[p].append(int(y))
                piece_of[y] = p
                break
        else:
            return int(y)
        if piece_of[y] < 0:
            return int(y)
    return [sorted(m) for m in members]


def _fiber_dims(sizes: list[tuple[int, int]], k_dom: int | None, k_cap: int) -> tuple[int, int]:
    ratios = {Fraction(nx, ny) for nx, ny in sizes}
    if len(ratios) != 1:
        raise CoveringError(
            "no fiber multiplicities equalize the blocks: |X_n|/|Y_n| takes values "
            + ", ".join(str(r) for r in sorted(ratios)),
            obstruction={"ratios": sorted(str(r) for r in ratios), "sizes": sizes[:20]})
    r = ratios.pop()  # k_cod / k_dom
    if k_dom is None:
        k_dom, k_cod = r.denominator, r.numerator
    else:
        if (k_dom * r).denominator != 1:
            raise CoveringError(f"k_dom={k_dom} times ratio {r} is not an integer",
                                obstruction={"ratio": str(r), "k_dom": k_dom})
        k_cod = int(k_dom * r)
    if max(k_dom, k_cod) > k_cap:
        raise CoveringError(f"fiber dimensions {k_dom}, {k_cod} exceed cap {k_cap}",
                            obstruction={"ratio": str(r), "k_cap": k_cap})
    return k_dom, k_cod


def covering_unitary(f: PointMap, max_block_diameter: int, seed: int = 0,
                     k_dom: int | None = None, k_cap: int = 16, retries: int = 2) -> Covering:
    """Block unitary covering f: codomain pieces Y_n of bounded diameter grown
    around image points, one seeded Haar block from l2(f^-1 Y_n) (x) C^k_dom
    onto l2(Y_n) (x) C^k_cod each.  Fiber dimensions are the smallest that
    equalize every block, unless ``k_dom`` is fixed by the caller."""
    if max_block_diameter < 0:
        raise ValidationError("block diameter must be non-negative")
    D = max_block_diameter
    for _ in range(retries + 1):
        parts = _partition(f, D)
        if not isinstance(parts, int):
            break
        D += 1
    else:
        raise CoveringError(
            f"point {parts} cannot join a piece of diameter <= {D - 1} around an image point",
            obstruction={"point": parts, "block_diameter": D - 1})
    pre_of = {}
    for x, y in enumerate(f.table.tolist()):
        pre_of.setdefault(y, []).append(x)
    preimages = [sorted(x for y in piece for x in pre_of.get(y, [])) for piece in parts]
    kd, kc = _fiber_dims([(len(p), len(q)) for p, q in zip(preimages, parts)], k_dom, k_cap)
    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    for Yn, Xn in zip(parts, preimages):
        r = _blocks.fiber_indices(Yn, kc)
        c = _blocks.fiber_indices(Xn, kd)
        B = haar_unitary(r.size, rng)
        rows.append(np.repeat(r, c.size))
        cols.append(np.tile(c, r.size))
        vals.append(B.ravel())
    dim = f.codomain.n * kc
    M = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    U = FiniteUnitary(f.domain, f.codomain, kd, kc, sp.csr_array(M))
    cert = verify_covers(U, f, bound=D)
    return Covering(U, cert, parts, preimages, D, kd, kc)


# ------------------------------------------------------ conjugation bound

@dataclass
class ConjugationReport:
    prop_T: int
    prop_conjugate: int
    C: int
    rho_at_prop: int
    bound: int
    holds: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def conjugate(U: FiniteUnitary, T: BandOperator, prune_tol: float = SUPPORT_FLOOR) -> BandOperator:
    if not (T.row_space.same_as(U.domain) and T.is_square and T.k_row == U.k_dom):
        raise ValidationError("operator does not act on the unitary's domain")
    M = U.matrix @ T.matrix @ U.matrix.conj().T
    return BandOperator(U.codomain, U.codomain, U.k_cod, U.k_cod, _blocks.as_csr(M), prune_tol)


def conjugation_propagation_bound(U: FiniteUnitary, f: PointMap, T: BandOperator,
                                  C: int | None = None, rho: ControlFunction | None = None) -> ConjugationReport:
    """Check prop(U T U*) <= rho(prop T) + 2C after pruning blocks below 1e-12."""
    C = verify_covers(U, f).C if C is None else C
    rho = expansion_profile(f) if rho is None else rho
    p = T.propagation
    q = conjugate(U, T).propagation
    bound = rho(p) + 2 * C
    return ConjugationReport(p, q, C, rho(p), bound, q <= bound)


# ---------------------------------------------------------------- locality

def _support_sets(U: FiniteUnitary, delta: float, fiber: str) -> list[np.ndarray]:
    """Y_x(delta) = {y : sup over unit v in E_x of ||U_yx v|| > delta}."""
    n = U.domain.n
    if fiber == "v0" or U.k_dom == 1:
        ys, xs, m = column_block_norms(U, 0)
    elif fiber == "all":
        ys, xs = _blocks.block_pattern(U.matrix, U.k_cod, U.k_dom)
        if U.k_cod == 1:
            m = np.sqrt(_blocks.block_norms_sq(U.matrix, 1, U.k_dom).tocsr()[ys, xs])
        else:
            m = np.array([np.linalg.norm(_dense_block(U, int(y), int(x)), 2) for y, x in zip(ys, xs)])
    else:
        raise ValidationError("fiber must be 'v0' or 'all'")
    keep = m > delta
    ys, xs = ys[keep], xs[keep]
    order = np.lexsort((ys, xs))
    ys, xs = ys[order], xs[order]
    bounds = np.searchsorted(xs, np.arange(n + 1))
    return [ys[bounds[x]:bounds[x + 1]] for x in range(n)]


def _dense_block(U: FiniteUnitary, y: int, x: int) -> np.ndarray:
    return U.matrix[y * U.k_cod:(y + 1) * U.k_cod, x * U.k_dom:(x + 1) * U.k_dom].toarray()


@dataclass
class LocalityAudit:
    delta: float
    radii: list[int]
    spread: list[int]          # S(R, delta); -1 when no pair contributes
    max_support: int           # largest |Y_x(delta)|

    def __call__(self, R: int) -> int:
        return self.spread[min(R, len(self.spread) - 1)]

    def to_json(self) -> dict:
        return dict(self.__dict__)


def locality_audit(U: FiniteUnitary, delta: float, r_max: int | None = None,
                   fiber: str = "v0") -> LocalityAudit:
    """S(R, delta) = max d(y1, y2) over d(x1, x2) <= R, y_i in Y_{x_i}(delta).

    E_x is span{e_0} (``fiber="v0"``) or the whole fiber (``"all"``).
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    X, Y = U.domain, U.codomain
    supports = _support_sets(U, delta, fiber)
    width = max((s.size for s in supports), default=0)
    top = X.diameter if r_max is None else int(r_max)
    if width == 0:
        return LocalityAudit(delta, list(range(top + 1)), [-1] * (top + 1), 0)
    pad = np.zeros((X.n, width), dtype=np.int64)
    present = np.array([s.size > 0 for s in supports])
    for x, s in enumerate(supports):
        if s.size:
            pad[x, :s.size] = s
            pad[x, s.size:] = s[0]
    best = np.zeros(X.diameter + 1, dtype=np.int64)  # stores spread + 1
    step = max(1, 2_000_000 // max(1, X.n * width * width))
    for lo in range(0, X.n, step):
        rows = pad[lo:lo + step]
        spread = np.zeros((rows.shape[0], X.n), dtype=np.int64)
        for i in range(width):
            for j in range(width):
                np.maximum(spread, Y.dist[rows[:, i][:, None], pad[:, j][None, :]], out=spread)
        spread += 1
        spread[~present[lo:lo + step], :] = 0
        spread[:, ~present] = 0
        keys = X.dist[lo:lo + step].astype(np.int64)
        np.maximum.at(best, keys.ravel(), spread.ravel())
    best = np.maximum.accumulate(best) - 1
    vals = [int(best[min(R, X.diameter)]) for R in range(top + 1)]
    return LocalityAudit(delta, list(range(top + 1)), vals, width)


@dataclass
class FamilyLocalityReport:
    delta: float
    radii: list[int]
    per_index: dict[int, list[int]]
    sup: list[int]
    verdicts: list[str]
    verdict: str

    def to_json(self) -> dict:
        return {"delta": self.delta, "radii": self.radii,
                "per_index": {str(k): v for k, v in self.per_index.items()},
                "sup": self.sup, "verdicts": self.verdicts, "verdict": self.verdict}


def family_locality_audit(unitaries: Mapping[int, FiniteUnitary], delta: float,
                          fiber: str = "v0") -> FamilyLocalityReport:
    idx = sorted(unitaries)
    top = min(unitaries[i].domain.diameter for i in idx)
    per = {i: locality_audit(unitaries[i], delta, top, fiber).spread for i in idx}
    cols = np.asarray([per[i] for i in idx])
    verdicts = [stabilization_verdict(cols[:, R]) for R in range(top + 1)]
    return FamilyLocalityReport(delta, list(range(top + 1)), per,
                                [int(v) for v in cols.max(axis=0)], verdicts, combine_verdicts(verdicts))


# ---------------------------------------------------------------- noise

def perturb_unitary(U: FiniteUnitary, magnitude: float = 0.1, band: int = 1, seed: int = 0) -> FiniteUnitary:
    """Band-limited noise followed by re-orthonormalisation.

    The connected components of U's block support are grouped into tiles by a
    greedy net of radius ``band`` on the codomain; inside each tile every
    entry receives complex noise of modulus at most ``magnitude`` and the tile
    is replaced by the unitary polar factor.  Tiles stay disjoint, so the
    result is unitary and the perturbation has propagation bounded by the
    tile diameter.
    """
    X, Y = U.domain, U.codomain
    ys, xs = _blocks.block_pattern(U.matrix, U.k_cod, U.k_dom)
    nY = Y.n
    graph = sp.coo_array((np.ones(ys.size), (ys, nY + xs)), shape=(nY + X.n, nY + X.n))
    ncomp, label = csgraph.connected_components(graph, directed=False)
    comp_y = [[] for _ in range(ncomp)]
    comp_x = [[] for _ in range(ncomp)]
    for y in range(nY):
        comp_y[label[y]].append(y)
    for x in range(X.n):
        comp_x[label[nY + x]].append(x)
    anchors = sorted((min(cy), c) for c, cy in enumerate(comp_y) if cy)
    centers: list[int] = []
    tiles: list[list[int]] = []
    for a, c in anchors:
        for t, ctr in enumerate(centers):
            if Y.dist[a, ctr] <= band:
                tiles[t].append(c)
                break
        else:
            centers.append(a)
            tiles.append([c])
    rng = np.random.default_rng(seed)
    csr = U.matrix
    rows, cols, vals = [], [], []
    for tile in tiles:
        Yt = sorted(y for c in tile for y in comp_y[c])
        Xt = sorted(x for c in tile for x in comp_x[c])
        r = _blocks.fiber_indices(Yt, U.k_cod)
        cidx = _blocks.fiber_indices(Xt, U.k_dom)
        W = csr[r][:, cidx].toarray()
        noise = magnitude * rng.random(W.shape) * np.exp(2j * np.pi * rng.random(W.shape))
        P, _, Qh = np.linalg.svd(W + noise)
        B = P @ Qh
        rows.append(np.repeat(r, cidx.size))
        cols.append(np.tile(cidx, r.size))
        vals.append(B.ravel())
    M = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=U.matrix.shape)
    return FiniteUnitary(X, Y, U.k_dom, U.k_cod, sp.csr_array(M))
