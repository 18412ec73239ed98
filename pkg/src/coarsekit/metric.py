"""Finite metric spaces, truncation families and bounded-geometry profiles."""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.sparse import csgraph
import scipy.sparse as sp

from . import cayley
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Points ``0..n-1`` with an integer distance matrix.

    ``points`` optionally carries recipe coordinates (grid tuples, group
    elements); it is metadata only and takes no part in equality or JSON.
    """

    n: int
    dist: np.ndarray
    label: str = ""
    points: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        d = np.asarray(self.dist)
        if d.ndim != 2 or d.shape != (self.n, self.n):
            raise ValidationError(f"dist must be {self.n}x{self.n}, got shape {d.shape}")
        if not (np.issubdtype(d.dtype, np.integer) or d.size == 0):
            if not np.all(np.equal(np.mod(d, 1), 0)):
                raise ValidationError("distances must be integers")
        d = d.astype(np.int32, copy=True)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    def __eq__(self, other):
        if not isinstance(other, FiniteMetricSpace):
            return NotImplemented
        if self is other:
            return True
        return self.n == other.n and self.label == other.label and np.array_equal(self.dist, other.dist)

    def __hash__(self):
        return hash((self.label, self.n))

    @functools.cached_property
    def diameter(self) -> int:
        return int(self.dist.max()) if self.n else 0

    def ball(self, x: int, r: int) -> np.ndarray:
        return np.flatnonzero(self.dist[x] <= r)

    def set_distance(self, a, b) -> float:
        """min d(a, b) over the two point sets; +inf if either is empty."""
        a = np.asarray(sorted(a), dtype=int)
        b = np.asarray(sorted(b), dtype=int)
        if a.size == 0 or b.size == 0:
            return float("inf")
        return int(self.dist[np.ix_(a, b)].min())

    def diameter_of(self, subset) -> int:
        s = np.asarray(sorted(subset), dtype=int)
        if s.size == 0:
            return 0
        return int(self.dist[np.ix_(s, s)].max())

    def same_as(self, other: "FiniteMetricSpace") -> bool:
        return self is other or self == other


# ---------------------------------------------------------------- recipes

@dataclass(frozen=True)
class Recipe:
    """A named generator of nested truncations.

    kinds: ``path``; ``grid`` (l1 edges) and ``kgrid`` (grid with diagonals,
    the l-infinity metric) with ``dim``; ``tree`` with ``branching``;
    ``cayley`` with a ``preset`` name or an explicit generating set.
    The ``size`` passed to :func:`build_space` is the point count for paths,
    the side length for grids, the depth for trees and the ball radius for
    Cayley balls.
    """

    kind: str
    dim: int = 2
    branching: int = 2
    preset: str | None = None
    generators: cayley.GeneratingSet | None = None

    def name(self) -> str:
        if self.kind == "path":
            return "path"
        if self.kind in ("grid", "kgrid"):
            return f"{self.kind}{self.dim}"
        if self.kind == "tree":
            return f"tree{self.branching}"
        if self.kind == "cayley":
            return f"cayley-{self.preset or 'custom'}"
        return self.kind

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind in ("grid", "kgrid"):
            out["dim"] = self.dim
        elif self.kind == "tree":
            out["branching"] = self.branching
        elif self.kind == "cayley":
            if self.preset is not None:
                out["preset"] = self.preset
            else:
                out["generators"] = self.generators.to_json()
        return out

    @classmethod
    def from_json(cls, doc: Mapping) -> "Recipe":
        if not isinstance(doc, Mapping) or "kind" not in doc:
            raise ValidationError("recipe must be an object with a 'kind'")
        kind = doc["kind"]
        if kind == "path":
            return cls("path")
        if kind in ("grid", "kgrid"):
            return cls(kind, dim=int(doc.get("dim", 2)))
        if kind == "tree":
            return cls("tree", branching=int(doc.get("branching", 2)))
        if kind == "cayley":
            if "preset" in doc:
                cayley.preset(doc["preset"])
                return cls("cayley", preset=doc["preset"])
            g = doc.get("generators")
            if not isinstance(g, Mapping):
                raise ValidationError("cayley recipe needs 'preset' or 'generators'")
            return cls("cayley", generators=cayley.generating_set(g.get("kind"), g.get("elements", [])))
        raise ValidationError(f"unknown recipe kind {kind!r}")


def parse_recipe(text: str) -> Recipe:
    """Parse the short CLI form: path, grid2, kgrid2, tree3, cayley:Z2, ..."""
    if text == "path":
        return Recipe("path")
    for kind in ("kgrid", "grid"):
        if text.startswith(kind) and text[len(kind):].isdigit():
            return Recipe(kind, dim=int(text[len(kind):]))
    if text.startswith("tree") and text[4:].isdigit():
        return Recipe("tree", branching=int(text[4:]))
    if text.startswith("cayley:"):
        name = text.split(":", 1)[1]
        cayley.preset(name)
        return Recipe("cayley", preset=name)
    raise ValidationError(f"unknown recipe {text!r}")


def _shell_order(side: int, dim: int) -> list[tuple[int, ...]]:
    # Points of [0, s)^d come first in every larger grid, so truncations nest as prefixes.
    pts = list(itertools.product(range(side), repeat=dim))
    pts.sort(key=lambda p: (max(p) if p else 0, p))
    return pts


def _tree_space(branching: int, depth: int):
    parent = [-1]
    frontier = [0]
    for d in range(depth):
        nxt = []
        for v in frontier:
            for _ in range(branching):
                parent.append(v)
                nxt.append(len(parent) - 1)
        frontier = nxt
    n = len(parent)
    rows = [i for i in range(1, n)]
    cols = [parent[i] for i in range(1, n)]
    adj = sp.csr_array((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    dist = csgraph.shortest_path(adj, directed=False, unweighted=True)
    return tuple(range(n)), dist.astype(np.int32)


@functools.lru_cache(maxsize=64)
def build_space(recipe: Recipe, size: int) -> FiniteMetricSpace:
    """Build and validate one truncation of a recipe."""
    if size < 0 or (size < 1 and recipe.kind in ("path", "grid", "kgrid")):
        raise ValidationError(f"size must be >= 1, got {size}")
    if recipe.kind == "path":
        idx = np.arange(size)
        dist = np.abs(idx[:, None] - idx[None, :])
        points = tuple(range(size))
    elif recipe.kind in ("grid", "kgrid"):
        if recipe.dim < 1:
            raise ValidationError("grid dimension must be >= 1")
        pts = _shell_order(size, recipe.dim)
        c = np.asarray(pts, dtype=np.int32)
        diff = np.abs(c[:, None, :] - c[None, :, :])
        dist = diff.sum(axis=2) if recipe.kind == "grid" else diff.max(axis=2)
        points = tuple(pts)
    elif recipe.kind == "tree":
        if recipe.branching < 1:
            raise ValidationError("tree branching must be >= 1")
        points, dist = _tree_space(recipe.branching, size)
    elif recipe.kind == "cayley":
        gens = cayley.preset(recipe.preset) if recipe.preset else recipe.generators
        points, dist = cayley.cayley_ball_metric(gens, size)
        points = tuple(points)
    else:
        raise ValidationError(f"unknown recipe kind {recipe.kind!r}")
    X = FiniteMetricSpace(len(points), dist, f"{recipe.name()}-{size}", points)
    report = validate_metric(X)
    if report:
        raise ValidationError(f"recipe produced an invalid metric: {report[0]}")
    return X


# ------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    axiom: str  # "shape" | "diagonal" | "discreteness" | "symmetry" | "triangle"
    witness: tuple
    detail: str = ""


def _is_graph_metric(d: np.ndarray) -> bool:
    """True iff d equals the shortest-path metric of its distance-1 graph.

    Checked locally: across every unit edge distances change by at most 1,
    and every point at distance m >= 1 from y has a neighbour at distance
    m - 1.  Together these force d = graph distance, hence a metric.
    """
    n = d.shape[0]
    if n <= 1:
        return True
    xs, zs = np.nonzero(d == 1)
    if np.unique(xs).size != n:
        return False
    starts = np.searchsorted(xs, np.arange(n))
    ends = np.searchsorted(xs, np.arange(n), side="right")
    step = max(1, 4_000_000 // (n * max(1, xs.size // n)))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        a, b = xs[starts[lo]:ends[hi - 1]], zs[starts[lo]:ends[hi - 1]]
        rows_b = d[b]
        gap = d[a] - rows_b
        if gap.max() > 1 or gap.min() < -1:
            return False
        # row x needs some neighbour z with d(z, y) = d(x, y) - 1 for every y != x
        down = (gap == 1).astype(np.float32)
        owner = sp.csr_array(
            (np.ones(a.size, dtype=np.float32), (a - lo, np.arange(a.size))), shape=(hi - lo, a.size))
        has_down = (owner @ down) > 0
        has_down[np.arange(hi - lo), np.arange(lo, hi)] = True
        if not has_down.all():
            return False
    return True


def validate_metric(X: FiniteMetricSpace, limit: int = 20) -> list[Violation]:
    """Every violated axiom, each with up to ``limit`` witnesses.

    An empty list means the matrix is a uniformly discrete integer metric.
    """
    d = X.dist
    n = X.n
    out: list[Violation] = []
    for x in np.flatnonzero(np.diag(d) != 0)[:limit]:
        out.append(Violation("diagonal", (int(x),), f"dist({x},{x})={d[x, x]}"))
    low = d < 1
    np.fill_diagonal(low, False)
    bad = np.argwhere(low)
    for x, y in bad[bad[:, 0] < bad[:, 1]][:limit]:
        out.append(Violation("discreteness", (int(x), int(y)), f"dist({x},{y})={d[x, y]} < 1"))
    asym = np.argwhere(d != d.T)
    for x, y in asym[asym[:, 0] < asym[:, 1]][:limit]:
        out.append(Violation("symmetry", (int(x), int(y)), f"dist({x},{y})={d[x, y]} != dist({y},{x})={d[y, x]}"))
    if out or _is_graph_metric(d):
        return out
    found = 0
    for z in range(n):
        via = d[:, z, None].astype(np.int64) + d[None, z, :]
        hits = np.argwhere(d > via)
        for x, y in hits:
            if x > y:
                continue
            if found >= limit:
                return out
            if x == z or y == z:
                continue
            out.append(Violation(
                "triangle", (int(x), int(z), int(y)),
                f"dist({x},{y})={d[x, y]} > dist({x},{z})+dist({z},{y})={via[x, y]}"))
            found += 1
    return out


# --------------------------------------------------------------- profiles

@dataclass(frozen=True)
class GeometryProfile:
    """N_R for R = 0..R_max (``entries[R]``)."""

    entries: tuple[int, ...]

    def __getitem__(self, R: int) -> int:
        return self.entries[min(R, len(self.entries) - 1)]

    def as_dict(self) -> dict[int, int]:
        return dict(enumerate(self.entries))


def bounded_geometry_profile(X: FiniteMetricSpace, r_max: int) -> GeometryProfile:
    if r_max < 0:
        raise ValidationError("r_max must be >= 0")
    # counts[x, R] = |B(x, R)| via a histogram of each row
    top = min(r_max, X.diameter)
    clipped = np.minimum(X.dist, top + 1).astype(np.int64)
    keys = (np.arange(X.n, dtype=np.int64)[:, None] * (top + 2) + clipped).ravel()
    counts = np.bincount(keys, minlength=X.n * (top + 2)).reshape(X.n, top + 2)
    cum = np.cumsum(counts[:, : top + 1], axis=1).max(axis=0)
    entries = list(int(v) for v in cum) + [X.n] * (r_max - top)
    return GeometryProfile(tuple(entries))


# ---------------------------------------------------------------- families

@dataclass(frozen=True, eq=False)
class SpaceFamily:
    generator: Recipe
    indices: tuple[int, ...]
    spaces: Mapping[int, FiniteMetricSpace]

    def __getitem__(self, index: int) -> FiniteMetricSpace:
        return self.spaces[index]

    def by_label(self, label: str) -> FiniteMetricSpace:
        for X in self.spaces.values():
            if X.label == label:
                return X
        raise KeyError(label)


def build_family(recipe: Recipe, indices: Sequence[int]) -> SpaceFamily:
    idx = tuple(sorted(int(i) for i in indices))
    return SpaceFamily(recipe, idx, {i: build_space(recipe, i) for i in idx})


def nesting_failures(family: SpaceFamily) -> list[tuple[int, int]]:
    """Consecutive index pairs whose smaller space is not a leading principal submatrix."""
    bad = []
    for a, b in zip(family.indices, family.indices[1:]):
        Xa, Xb = family[a], family[b]
        if Xa.n > Xb.n or not np.array_equal(Xa.dist, Xb.dist[: Xa.n, : Xa.n]):
            bad.append((a, b))
    return bad


def family_profile(family: SpaceFamily, r_max: int) -> GeometryProfile:
    """Pointwise maximum of the members' profiles."""
    profiles = [bounded_geometry_profile(family[i], r_max).entries for i in family.indices]
    return GeometryProfile(tuple(int(v) for v in np.max(np.asarray(profiles), axis=0)))


# -------------------------------------------------------------------- JSON

def space_to_json(X: FiniteMetricSpace) -> dict:
    return {"label": X.label, "n": X.n, "dist": X.dist.tolist()}


def space_from_json(doc: Any) -> FiniteMetricSpace:
    if not isinstance(doc, Mapping):
        raise ValidationError("space document must be a JSON object")
    for key, typ in (("label", str), ("n", int), ("dist", list)):
        if key not in doc:
            raise ValidationError(f"space document missing {key!r}")
        if not isinstance(doc[key], typ) or isinstance(doc[key], bool):
            raise ValidationError(f"space field {key!r} must be {typ.__name__}")
    n = doc["n"]
    rows = doc["dist"]
    if len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise ValidationError(f"'dist' must be an {n}x{n} list of lists")
    if any(not isinstance(v, int) or isinstance(v, bool) for r in rows for v in r):
        raise ValidationError("'dist' entries must be integers")
    X = FiniteMetricSpace(n, np.asarray(rows, dtype=np.int64).reshape(n, n), doc["label"])
    report = validate_metric(X)
    if report:
        raise ValidationError("metric axioms violated: " + "; ".join(v.detail for v in report[:5]))
    return X


def save_space(X: FiniteMetricSpace) -> str:
    return json.dumps(space_to_json(X), sort_keys=True)


def load_space(text: str | bytes) -> FiniteMetricSpace:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from None
    return space_from_json(doc)


def family_to_json(family: SpaceFamily) -> dict:
    return {
        "generator": family.generator.to_json(),
        "indices": list(family.indices),
        "spaces": {str(i): space_to_json(family[i]) for i in family.indices},
    }


def family_from_json(doc: Any) -> SpaceFamily:
    if not isinstance(doc, Mapping) or "generator" not in doc or "indices" not in doc:
        raise ValidationError("family document needs 'generator' and 'indices'")
    recipe = Recipe.from_json(doc["generator"])
    indices = tuple(sorted(int(i) for i in doc["indices"]))
    if "spaces" in doc:
        spaces = doc["spaces"]
        if set(spaces) != {str(i) for i in indices}:
            raise ValidationError("family 'spaces' keys must match 'indices'")
        fam = SpaceFamily(recipe, indices, {i: space_from_json(spaces[str(i)]) for i in indices})
        if nesting_failures(fam):
            raise ValidationError(f"family truncations not nested: {nesting_failures(fam)}")
        return fam
    return build_family(recipe, indices)


def space_from_label(label: str) -> FiniteMetricSpace:
    """Rebuild a recipe space from its label, e.g. ``grid2-8`` or ``cayley-Z2-2``."""
    head, _, size = label.rpartition("-")
    if not head or not size.isdigit():
        raise ValidationError(f"label {label!r} does not name a recipe space")
    text = "cayley:" + head.split("-", 1)[1] if head.startswith("cayley-") else head
    return build_space(parse_recipe(text), int(size))
