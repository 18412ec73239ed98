"""Point maps between finite spaces and their coarse certificates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .metric import FiniteMetricSpace

BOUNDED = "BOUNDED"
DIVERGENT = "DIVERGENT"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True, eq=False)
class PointMap:
    domain: FiniteMetricSpace
    codomain: FiniteMetricSpace
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table)
        if t.shape != (self.domain.n,):
            raise ValidationError(f"map table must have length {self.domain.n}, got {t.shape}")
        if t.size and (not np.issubdtype(t.dtype, np.integer) or t.min() < 0 or t.max() >= self.codomain.n):
            raise ValidationError("map table entries must be codomain indices")
        t = t.astype(np.int64, copy=True)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def __call__(self, x: int) -> int:
        return int(self.table[x])

    def __eq__(self, other):
        if not isinstance(other, PointMap):
            return NotImplemented
        return (self.domain.same_as(other.domain) and self.codomain.same_as(other.codomain)
                and np.array_equal(self.table, other.table))

    __hash__ = object.__hash__

    def to_json(self) -> dict:
        return {"domain": self.domain.label, "codomain": self.codomain.label, "table": self.table.tolist()}


def identity_map(X: FiniteMetricSpace, Y: FiniteMetricSpace | None = None) -> PointMap:
    """x -> x, optionally into a second space on the same (or a larger) index set."""
    return PointMap(X, Y if Y is not None else X, np.arange(X.n))


def compose(f: PointMap, g: PointMap) -> PointMap:
    """f after g."""
    if not g.codomain.same_as(f.domain):
        raise ValidationError("maps are not composable")
    return PointMap(g.domain, f.codomain, f.table[g.table])


def map_from_json(doc: Any, spaces: Mapping[str, FiniteMetricSpace]) -> PointMap:
    if not isinstance(doc, Mapping):
        raise ValidationError("map document must be a JSON object")
    for key in ("domain", "codomain", "table"):
        if key not in doc:
            raise ValidationError(f"map document missing {key!r}")
    try:
        X, Y = spaces[doc["domain"]], spaces[doc["codomain"]]
    except KeyError as exc:
        raise ValidationError(f"unknown space label {exc.args[0]!r}") from None
    table = doc["table"]
    if not isinstance(table, list) or any(not isinstance(v, int) or isinstance(v, bool) for v in table):
        raise ValidationError("map 'table' must be a list of integers")
    return PointMap(X, Y, np.asarray(table, dtype=np.int64))


# ---------------------------------------------------------- control functions

@dataclass(frozen=True)
class ControlFunction:
    """S(R) for R = 0..len-1; constant beyond the last recorded radius."""

    entries: tuple[int, ...]

    def __post_init__(self):
        if any(b < a for a, b in zip(self.entries, self.entries[1:])):
            raise ValidationError("control function must be non-decreasing")

    def __call__(self, R: int) -> int:
        if R < 0:
            return 0
        return self.entries[min(int(R), len(self.entries) - 1)]

    def as_dict(self) -> dict[int, int]:
        return dict(enumerate(self.entries))


def _max_by_key(keys: np.ndarray, values: np.ndarray, size: int) -> np.ndarray:
    """out[k] = max of values with key k (-1 where absent), via a 2-d bincount."""
    vmax = int(values.max()) + 1 if values.size else 1
    hits = np.bincount(keys.ravel().astype(np.int64) * vmax + values.ravel(), minlength=size * vmax)
    hits = hits[: size * vmax].reshape(size, vmax) > 0
    present = hits.any(axis=1)
    last = vmax - 1 - np.argmax(hits[:, ::-1], axis=1)
    return np.where(present, last, -1)


def expansion_profile(f: PointMap, r_max: int | None = None) -> ControlFunction:
    """Exact S(R) = max{d(f x1, f x2) : d(x1, x2) <= R}, all pairs scanned.

    Tabulated up to the domain diameter unless ``r_max`` is given.
    """
    X = f.domain
    top = X.diameter if r_max is None else int(r_max)
    if X.n == 0:
        return ControlFunction((0,) * (top + 1))
    n = X.n
    best = np.full(X.diameter + 1, -1, dtype=np.int64)
    step = max(1, 4_000_000 // n)
    for lo in range(0, n, step):
        rows = f.table[lo:lo + step]
        img = f.codomain.dist[np.ix_(rows, f.table)]
        best = np.maximum(best, _max_by_key(X.dist[lo:lo + step], img, X.diameter + 1))
    best = np.maximum.accumulate(np.maximum(best, 0))
    vals = [int(best[min(R, X.diameter)]) for R in range(top + 1)]
    return ControlFunction(tuple(vals))


def closeness_constant(f: PointMap, g: PointMap) -> int:
    """max over x of d(f x, g x)."""
    if not (f.domain.same_as(g.domain) and f.codomain.same_as(g.codomain)):
        raise ValidationError("closeness needs maps with the same domain and codomain")
    if f.domain.n == 0:
        return 0
    return int(f.codomain.dist[f.table, g.table].max())


@dataclass(frozen=True, eq=False)
class CoarseEquivalenceCertificate:
    f: PointMap
    g: PointMap
    rho_f: ControlFunction
    rho_g: ControlFunction
    c_fg: int  # max_y d(f g y, y)
    c_gf: int  # max_x d(g f x, x)

    def to_json(self) -> dict:
        return {
            "f": self.f.to_json(),
            "g": self.g.to_json(),
            "rho_f": list(self.rho_f.entries),
            "rho_g": list(self.rho_g.entries),
            "c_fg": self.c_fg,
            "c_gf": self.c_gf,
        }


def verify_coarse_equivalence(f: PointMap, g: PointMap) -> CoarseEquivalenceCertificate:
    if not (f.codomain.same_as(g.domain) and g.codomain.same_as(f.domain)):
        raise ValidationError("need f: X -> Y and g: Y -> X")
    c_fg = closeness_constant(compose(f, g), identity_map(g.domain))
    c_gf = closeness_constant(compose(g, f), identity_map(f.domain))
    return CoarseEquivalenceCertificate(f, g, expansion_profile(f), expansion_profile(g), c_fg, c_gf)


# -------------------------------------------------------- family uniformity

def stabilization_verdict(values: Sequence[int]) -> str:
    """BOUNDED when the running sup is constant over the top half of the
    indices, DIVERGENT when the values strictly increase across all indices.

    Evidence only: a finite family cannot prove either asymptotic statement.
    """
    v = [int(a) for a in values]
    if len(v) >= 2 and all(b > a for a, b in zip(v, v[1:])):
        return DIVERGENT
    running = np.maximum.accumulate(v) if v else []
    top = running[len(v) // 2:]
    if len(top) == 0 or all(t == top[0] for t in top):
        return BOUNDED
    return INCONCLUSIVE


def combine_verdicts(verdicts) -> str:
    verdicts = list(verdicts)
    if DIVERGENT in verdicts:
        return DIVERGENT
    if all(v == BOUNDED for v in verdicts):
        return BOUNDED
    return INCONCLUSIVE


@dataclass
class UniformityReport:
    indices: list[int]
    radii: list[int]
    profiles: dict[str, dict[int, list[int]]]   # name -> index -> S(R) over radii
    sup_profiles: dict[str, list[int]]          # name -> sup over indices, per R
    profile_verdicts: dict[str, list[str]]      # name -> verdict per R
    constants: dict[str, dict[int, int]] = field(default_factory=dict)
    constant_verdicts: dict[str, str] = field(default_factory=dict)
    verdict: str = INCONCLUSIVE

    def to_json(self) -> dict:
        return {
            "indices": self.indices,
            "radii": self.radii,
            "profiles": {k: {str(i): v for i, v in d.items()} for k, d in self.profiles.items()},
            "sup_profiles": self.sup_profiles,
            "profile_verdicts": self.profile_verdicts,
            "constants": {k: {str(i): v for i, v in d.items()} for k, d in self.constants.items()},
            "constant_verdicts": self.constant_verdicts,
            "verdict": self.verdict,
        }


def _check_embedding(maps: Mapping[int, PointMap], tolerance: int | None, name: str) -> None:
    if tolerance is None:
        return
    idx = sorted(maps)
    for a, b in zip(idx, idx[1:]):
        fa, fb = maps[a], maps[b]
        na = fa.domain.n
        if fb.domain.n < na or fa.codomain.n > fb.codomain.n:
            raise ValidationError(f"{name}: truncation {a} does not embed in {b}")
        gap = fb.codomain.dist[fa.table, fb.table[:na]]
        if na and gap.max() > tolerance:
            x = int(np.argmax(gap))
            raise ValidationError(
                f"{name}: maps at indices {a} and {b} disagree at point {x} by {int(gap.max())} > {tolerance}")


def _profile_section(maps: Mapping[int, PointMap], radii: list[int]):
    per_index = {i: [expansion_profile(maps[i], radii[-1])(R) for R in radii] for i in sorted(maps)}
    columns = np.asarray([per_index[i] for i in sorted(maps)])
    sup = [int(v) for v in columns.max(axis=0)]
    verdicts = [stabilization_verdict(columns[:, j]) for j in range(len(radii))]
    return per_index, sup, verdicts


def map_uniformity(maps: Mapping[int, PointMap], r_max: int | None = None,
                   embedding_tolerance: int | None = 0, name: str = "f") -> UniformityReport:
    """Expansion profiles of a family of maps, judged for uniformity.

    Radii run up to the smallest domain diameter so every truncation sees
    the full range of each radius.
    """
    _check_embedding(maps, embedding_tolerance, name)
    idx = sorted(maps)
    top = min(maps[i].domain.diameter for i in idx) if r_max is None else r_max
    radii = list(range(top + 1))
    per, sup, ver = _profile_section(maps, radii)
    return UniformityReport(idx, radii, {name: per}, {name: sup}, {name: ver},
                            verdict=combine_verdicts(ver))


def family_uniformity(certs: Mapping[int, CoarseEquivalenceCertificate], r_max: int | None = None,
                      embedding_tolerance: int | None = 0) -> UniformityReport:
    """Uniformity of coarse-equivalence certificates across a truncation family.

    Maps must agree with the nested embeddings up to ``embedding_tolerance``
    (``None`` skips the check).
    """
    idx = sorted(certs)
    fs = {i: certs[i].f for i in idx}
    gs = {i: certs[i].g for i in idx}
    _check_embedding(fs, embedding_tolerance, "f")
    _check_embedding(gs, embedding_tolerance, "g")
    top_f = min(fs[i].domain.diameter for i in idx) if r_max is None else r_max
    top_g = min(gs[i].domain.diameter for i in idx) if r_max is None else r_max
    pf, sf, vf = _profile_section(fs, list(range(top_f + 1)))
    pg, sg, vg = _profile_section(gs, list(range(top_g + 1)))
    constants = {"c_fg": {i: certs[i].c_fg for i in idx}, "c_gf": {i: certs[i].c_gf for i in idx}}
    cverd = {k: stabilization_verdict([v[i] for i in idx]) for k, v in constants.items()}
    return UniformityReport(
        idx, list(range(max(top_f, top_g) + 1)),
        {"rho_f": pf, "rho_g": pg}, {"rho_f": sf, "rho_g": sg}, {"rho_f": vf, "rho_g": vg},
        constants, cverd, combine_verdicts(vf + vg + list(cverd.values())))
