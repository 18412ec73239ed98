"""Metric sparsification: separated, bounded pieces carrying a mass fraction.

Given a probability mass on X, a target fraction kappa and a separation S,
find disjoint pieces Omega_i with total mass >= kappa, pairwise distance > S
and the smallest possible maximal diameter D.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import PipelineRejection, ValidationError
from .metric import FiniteMetricSpace

MASS_TOL = 1e-12
UNIT_TOL = 1e-10
EXACT_CAP = 14
FEASIBLE = "FEASIBLE"
INFEASIBLE = "INFEASIBLE"


@dataclass(frozen=True, eq=False)
class MassDistribution:
    space: FiniteMetricSpace
    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (self.space.n,):
            raise ValidationError(f"mass must have length {self.space.n}")
        if (m < 0).any():
            raise ValidationError("mass must be non-negative")
        if abs(m.sum() - 1.0) > MASS_TOL:
            raise ValidationError(f"mass sums to {m.sum():.15g}, not 1")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    def of(self, points) -> float:
        pts = list(points)
        return float(self.mass[pts].sum()) if pts else 0.0


def uniform_mass(X: FiniteMetricSpace, support: Sequence[int] | None = None) -> MassDistribution:
    support = range(X.n) if support is None else support
    m = np.zeros(X.n)
    m[list(support)] = 1.0
    return MassDistribution(X, m / m.sum())


def vector_mass(X: FiniteMetricSpace, xi, k: int = 1) -> MassDistribution:
    """mass(x) = ||xi(x)||^2 for a unit vector xi in l2(X) (x) C^k."""
    xi = np.asarray(xi, dtype=np.complex128).ravel()
    if xi.size != X.n * k:
        raise ValidationError(f"vector has length {xi.size}, expected {X.n * k}")
    norm2 = float(np.vdot(xi, xi).real)
    if abs(math.sqrt(norm2) - 1.0) > UNIT_TOL:
        raise ValidationError(f"vector norm {math.sqrt(norm2):.12g} is not 1")
    per_point = (np.abs(xi.reshape(X.n, k)) ** 2).sum(axis=1)
    return MassDistribution(X, per_point / norm2)


@dataclass(frozen=True)
class Decomposition:
    pieces: tuple[tuple[int, ...], ...]

    @classmethod
    def of(cls, pieces) -> "Decomposition":
        return cls(tuple(sorted(tuple(sorted(int(v) for v in p)) for p in pieces if len(p))))

    @property
    def omega(self) -> tuple[int, ...]:
        return tuple(sorted(v for p in self.pieces for v in p))


@dataclass
class SparsificationResult:
    decomposition: Decomposition
    kappa_achieved: float
    separation_achieved: float   # +inf with fewer than two pieces
    D_achieved: int
    kappa: float
    S: int
    feasible: bool
    method: str = "validate"

    @property
    def verdict(self) -> str:
        return FEASIBLE if self.feasible else INFEASIBLE

    def to_json(self) -> dict:
        sep = self.separation_achieved
        return {
            "pieces": [list(p) for p in self.decomposition.pieces],
            "omega": list(self.decomposition.omega),
            "kappa_achieved": self.kappa_achieved,
            "separation_achieved": None if sep == math.inf else int(sep),
            "D_achieved": self.D_achieved,
            "kappa": self.kappa,
            "S": self.S,
            "verdict": self.verdict,
            "method": self.method,
        }


def validate_decomposition(mu: MassDistribution, dec: Decomposition, kappa: float, S: int,
                           method: str = "validate") -> SparsificationResult:
    X = mu.space
    seen: set[int] = set()
    for p in dec.pieces:
        for v in p:
            if not 0 <= v < X.n:
                raise ValidationError(f"point {v} is not in the space")
            if v in seen:
                raise ValidationError(f"pieces overlap at point {v}")
            seen.add(v)
    pieces = dec.pieces
    D = max((X.diameter_of(p) for p in pieces), default=0)
    sep = math.inf
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            sep = min(sep, X.set_distance(pieces[i], pieces[j]))
    achieved = mu.of(dec.omega)
    ok = achieved >= kappa - MASS_TOL and sep > S
    return SparsificationResult(dec, achieved, sep, D, kappa, S, ok, method)


# ------------------------------------------------------------- exact solver

class _Search:
    """Depth-first search over Omega in index order.

    Points of Omega within S of each other must share a piece, so for a fixed
    Omega the finest admissible decomposition is the set of components of the
    "distance <= S" graph on Omega; merging pieces only raises diameters.  A
    branch dies as soon as a component exceeds diameter D or the mass still
    available cannot reach kappa.
    """

    def __init__(self, mu: MassDistribution, kappa: float, S: int, D: int):
        self.d = mu.space.dist
        self.m = mu.mass
        self.n = mu.space.n
        self.kappa = kappa - MASS_TOL
        self.S, self.D = S, D
        self.suffix = np.r_[np.cumsum(self.m[::-1])[::-1], 0.0]
        self.found: list[tuple[tuple[int, ...], ...]] = []
        self.stop_at_first = True

    def run(self) -> bool:
        self._dfs(0, [], 0.0)
        return bool(self.found)

    def _dfs(self, i: int, comps: list[tuple[list[int], int]], mass: float) -> bool:
        if mass + self.suffix[i] < self.kappa:
            return False
        if i == self.n or mass >= self.kappa and self.stop_at_first:
            if mass >= self.kappa:
                self.found.append(tuple(sorted(tuple(c) for c, _ in comps)))
                return self.stop_at_first
            return False
        # include i
        d = self.d
        touching = [c for c in comps if d[i, c[0]].min() <= self.S]
        merged = [i] + [v for c, _ in touching for v in c]
        diam = max([dm for _, dm in touching] + [int(d[i, merged].max())])
        if diam <= self.D and len(touching) > 1:
            diam = int(d[np.ix_(merged, merged)].max())
        if diam <= self.D:
            rest = [c for c in comps if not any(c is t for t in touching)]
            if self._dfs(i + 1, rest + [(sorted(merged), diam)], mass + self.m[i]):
                return True
        # exclude i
        return self._dfs(i + 1, comps, mass)


def _empty_result(mu, kappa, S, method):
    return validate_decomposition(mu, Decomposition(()), kappa, S, method)


def sparsify_exact(mu: MassDistribution, kappa: float, S: int, cap: int = EXACT_CAP) -> SparsificationResult:
    """Optimal D, raising D through the distinct distance values.

    Among optimal decompositions the lexicographically smallest sorted list
    of (sorted) pieces is returned.
    """
    X = mu.space
    if X.n > cap:
        raise PipelineRejection(f"exact solver is capped at {cap} points, space has {X.n}")
    if kappa <= 0:
        return _empty_result(mu, kappa, S, "exact")
    if kappa > 1 + MASS_TOL:
        res = _empty_result(mu, kappa, S, "exact")
        return res
    for D in np.unique(X.dist).tolist():
        probe = _Search(mu, kappa, S, D)
        if probe.run():
            every = _Search(mu, kappa, S, D)
            every.stop_at_first = False
            every.run()
            best = min(every.found)
            return validate_decomposition(mu, Decomposition.of(best), kappa, S, "exact")
    return _empty_result(mu, kappa, S, "exact")  # unreachable for kappa <= 1


def exact_feasible(mu: MassDistribution, kappa: float, S: int, D: int) -> bool:
    """Is there an admissible decomposition with diameter <= D?"""
    if kappa <= 0:
        return True
    return _Search(mu, kappa, S, D).run()


# ------------------------------------------------------------ greedy solver

def sparsify_greedy(mu: MassDistribution, kappa: float, S: int) -> SparsificationResult:
    """Balls around points in decreasing-mass order, radius raised until kappa is met.

    Points within S of an accepted piece are blocked for later pieces, which
    keeps every output separated.  If no radius reaches kappa the heaviest
    attempt is returned with an infeasible verdict.
    """
    X = mu.space
    if kappa <= 0:
        return _empty_result(mu, kappa, S, "greedy")
    order = sorted(range(X.n), key=lambda x: (-mu.mass[x], x))
    best = None
    for r in range(X.diameter + 1):
        covered = np.zeros(X.n, dtype=bool)
        blocked = np.zeros(X.n, dtype=bool)
        pieces = []
        mass = 0.0
        for c in order:
            if covered[c] or blocked[c]:
                continue
            piece = np.flatnonzero((X.dist[c] <= r) & ~covered & ~blocked)
            pieces.append(piece.tolist())
            covered[piece] = True
            blocked |= (X.dist[piece] <= S).any(axis=0)
            mass += float(mu.mass[piece].sum())
            if mass >= kappa - MASS_TOL:
                break
        res = validate_decomposition(mu, Decomposition.of(pieces), kappa, S, "greedy")
        if res.feasible:
            return res
        if best is None or res.kappa_achieved > best.kappa_achieved:
            best = res
    return best


# -------------------------------------------------------------- constants

def threshold_constants(kappa, M) -> dict[str, Any]:
    """t = kappa/5, eps = kappa/4 and c = sqrt(t/M), kept exact where possible."""
    kappa = Fraction(kappa)
    t = kappa / 5
    eps = kappa / 4
    return {"t": t, "eps": eps, "c": math.sqrt(t / Fraction(M)), "t_plus_eps_below_half": t + eps < kappa / 2}


# --------------------------------------------------------------------- JSON

def instance_from_json(doc: Any, spaces: Mapping[str, FiniteMetricSpace]):
    if not isinstance(doc, Mapping):
        raise ValidationError("instance document must be a JSON object")
    for key in ("space", "mass", "kappa", "S"):
        if key not in doc:
            raise ValidationError(f"instance document missing {key!r}")
    try:
        X = spaces[doc["space"]]
    except KeyError:
        raise ValidationError(f"unknown space label {doc['space']!r}") from None
    S = doc["S"]
    if not isinstance(S, int) or isinstance(S, bool):
        raise ValidationError("'S' must be an integer")
    return MassDistribution(X, np.asarray(doc["mass"], dtype=float)), float(doc["kappa"]), S


def instance_to_json(mu: MassDistribution, kappa: float, S: int) -> dict:
    return {"space": mu.space.label, "mass": mu.mass.tolist(), "kappa": kappa, "S": S}
