"""Morphism classes over truncation families and the two functors between them.

A class is a representative per family index plus an identification radius;
all category laws are checked up to that radius.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import _parallel
from .errors import CoveringError, ExtractionError, ValidationError
from .maps import (BOUNDED, PointMap, UniformityReport, closeness_constant, compose, identity_map,
                   map_uniformity, stabilization_verdict)
from .rigidity import (CERTIFIED, SUPPORT_FLOOR, Covering, covering_unitary, extract_map_support,
                       extract_map_threshold)
from .unitary import FiniteUnitary, identity_unitary

PRUNE = 1e-12


@dataclass
class CoarseMorphismClass:
    maps: dict[int, PointMap]
    closeness_radius: int = 0
    uniformity: UniformityReport | None = None

    @property
    def indices(self) -> list[int]:
        return sorted(self.maps)

    def __getitem__(self, i: int) -> PointMap:
        return self.maps[i]


@dataclass
class UnitaryMorphismClass:
    unitaries: dict[int, FiniteUnitary]
    closeness_prop_bound: int = 0
    coverings: dict[int, Covering] = field(default_factory=dict)

    @property
    def indices(self) -> list[int]:
        return sorted(self.unitaries)

    def __getitem__(self, i: int) -> FiniteUnitary:
        return self.unitaries[i]


@dataclass
class FunctorReport:
    direction: str           # "F(U(f)) vs f" or "U(F(U)) vs U"
    indices: list[int]
    bounds: dict[int, int]   # per-index closeness constant or propagation
    limit: int | None        # the family-wide bound being checked
    verdict: str
    holds: bool
    certificates: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "indices": self.indices,
            "bounds": {str(i): b for i, b in self.bounds.items()},
            "certificates": {str(i): c for i, c in self.certificates.items()},
            "limit": self.limit,
            "verdict": self.verdict,
            "holds": self.holds,
        }

    def csv_rows(self) -> list[list]:
        return [[i, self.bounds[i], self.certificates.get(i, ""), self.limit] for i in self.indices]


# ------------------------------------------------------------ closeness

@dataclass
class CloseReport:
    propagation: int
    bound: int
    close: bool


def unitary_closeness(U: FiniteUnitary, V: FiniteUnitary) -> int:
    """propagation(U* V) with blocks below 1e-12 discarded."""
    if not (U.domain.same_as(V.domain) and U.codomain.same_as(V.codomain)
            and U.k_dom == V.k_dom and U.k_cod == V.k_cod):
        raise ValidationError("unitaries act between different spaces or fibers")
    return U.adjoint().compose(V).as_band(PRUNE).propagation


def unitaries_close(U: FiniteUnitary, V: FiniteUnitary, bound: int) -> CloseReport:
    p = unitary_closeness(U, V)
    return CloseReport(p, bound, p <= bound)


# -------------------------------------------------------------- functors

def functor_U(cls: CoarseMorphismClass, D: int, seed: int = 0, k_dom: int | None = None,
              k_cap: int = 16) -> UnitaryMorphismClass:
    """Covering unitary per index, seeded with ``seed + index``."""
    def cover(i):
        try:
            return covering_unitary(cls.maps[i], D, seed=seed + i, k_dom=k_dom, k_cap=k_cap)
        except CoveringError as exc:
            raise CoveringError(f"index {i}: {exc}", obstruction={**exc.obstruction, "index": i}) from None

    idx = cls.indices
    covs = dict(zip(idx, _parallel.ordered_map(cover, idx)))
    return UnitaryMorphismClass({i: covs[i].unitary for i in idx}, 0, covs)


def functor_F(cls: UnitaryMorphismClass, c: float = 0.1, method: str = "threshold",
              eta: float = SUPPORT_FLOOR) -> CoarseMorphismClass:
    """Extracted map per index; an uncertified index is a rejection."""
    def extract(i):
        U = cls.unitaries[i]
        if method == "support":
            try:
                return extract_map_support(U, eta)
            except ExtractionError as exc:
                raise ExtractionError(f"index {i}: {exc}", point=exc.point, index=i) from None
        if method != "threshold":
            raise ValidationError(f"unknown extraction method {method!r}")
        ex = extract_map_threshold(U, c)
        if ex.verdict != CERTIFIED:
            raise ExtractionError(
                f"index {i}: extraction uncertified at point {ex.worst_point} "
                f"(mass {ex.min_mass:.4g} < c={c})", point=ex.worst_point, index=i)
        return ex.map

    idx = cls.indices
    maps = dict(zip(idx, _parallel.ordered_map(extract, idx)))
    return CoarseMorphismClass(maps, 0, map_uniformity(maps, embedding_tolerance=None, name="F"))


def compose_unitary_classes(A: UnitaryMorphismClass, B: UnitaryMorphismClass) -> UnitaryMorphismClass:
    """A after B, index by index."""
    if A.indices != B.indices:
        raise ValidationError("classes are indexed differently")
    return UnitaryMorphismClass({i: A[i].compose(B[i]) for i in A.indices})


def compose_map_classes(f: CoarseMorphismClass, g: CoarseMorphismClass) -> CoarseMorphismClass:
    if f.indices != g.indices:
        raise ValidationError("classes are indexed differently")
    return CoarseMorphismClass({i: compose(f[i], g[i]) for i in f.indices})


def identity_map_class(spaces: Mapping[int, object]) -> CoarseMorphismClass:
    return CoarseMorphismClass({i: identity_map(X) for i, X in spaces.items()})


def identity_unitary_class(spaces: Mapping[int, object], k: int = 1) -> UnitaryMorphismClass:
    return UnitaryMorphismClass({i: identity_unitary(X, k) for i, X in spaces.items()})


# ------------------------------------------------------------ round trips

def roundtrip_maps(cls: CoarseMorphismClass, D: int, seed: int = 0, c: float = 0.1) -> FunctorReport:
    """closeness(F(U(f)), f) per index against 2C, C the largest covering constant."""
    ucls = functor_U(cls, D, seed)
    back = functor_F(ucls, c)
    idx = cls.indices
    bounds = {i: closeness_constant(back[i], cls[i]) for i in idx}
    certs = {i: ucls.coverings[i].certificate.C for i in idx}
    limit = 2 * max(certs.values())
    verdict = stabilization_verdict([bounds[i] for i in idx])
    holds = all(b <= limit for b in bounds.values()) and verdict == BOUNDED
    return FunctorReport("F(U(f)) vs f", idx, bounds, limit, verdict, holds, certs)


def roundtrip_unitaries(cls: UnitaryMorphismClass, D: int, seed: int = 0, c: float = 0.1,
                        bound: int | None = None) -> FunctorReport:
    """propagation(U* U(F(U))) per index; one integer bound for the family.

    Without an explicit ``bound`` the largest observed value is the family
    bound and the verdict carries the uniformity evidence.
    """
    maps = functor_F(cls, c)
    idx = cls.indices
    k_dom = {cls[i].k_dom for i in idx}
    again = functor_U(maps, D, seed, k_dom=k_dom.pop() if len(k_dom) == 1 else None)
    bounds = {i: unitary_closeness(cls[i], again[i]) for i in idx}
    limit = max(bounds.values()) if bound is None else bound
    verdict = stabilization_verdict([bounds[i] for i in idx])
    holds = all(b <= limit for b in bounds.values()) and verdict == BOUNDED
    certs = {i: again.coverings[i].certificate.C for i in idx}
    return FunctorReport("U(F(U)) vs U", idx, bounds, limit, verdict, holds, certs)


def roundtrip_report(cls, D: int, seed: int = 0, c: float = 0.1) -> FunctorReport:
    if isinstance(cls, CoarseMorphismClass):
        return roundtrip_maps(cls, D, seed, c)
    if isinstance(cls, UnitaryMorphismClass):
        return roundtrip_unitaries(cls, D, seed, c)
    raise ValidationError("roundtrip needs a coarse or unitary morphism class")


def functoriality_defects(A: UnitaryMorphismClass, B: UnitaryMorphismClass, c: float = 0.1) -> dict[int, int]:
    """closeness(F(A o B), F(A) o F(B)) per index."""
    lhs = functor_F(compose_unitary_classes(A, B), c)
    rhs = compose_map_classes(functor_F(A, c), functor_F(B, c))
    return {i: closeness_constant(lhs[i], rhs[i]) for i in lhs.indices}

