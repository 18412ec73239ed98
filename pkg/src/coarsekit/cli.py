"""Batch command-line front end.

Every command writes its report into ``--out`` (default: the current
directory) atomically.  Exit codes: 0 on success, including negative
verdicts; 2 for malformed input; 3 when a pipeline rejects well-formed input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Sequence

from . import band, categories, maps, metric, rigidity, sparsify, unitary
from .errors import PipelineRejection, ValidationError

EXIT_INVALID = 2
EXIT_REJECTED = 3


# ------------------------------------------------------------------ output

def _dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, name: str, doc: Any) -> Path:
    path = Path(args.out) / name
    write_atomic(path, _dumps(doc))
    print(path)
    return path


# ------------------------------------------------------------------- input

def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None


class SpaceRegistry(dict):
    """Spaces by label: explicit ``--space`` inputs first, recipe labels on demand."""

    def __missing__(self, label: str):
        X = metric.space_from_label(label)
        self[label] = X
        return X


def _spaces(args) -> SpaceRegistry:
    reg = SpaceRegistry()
    for item in args.space or []:
        if "@" in item and not Path(item).exists():
            recipe, size = item.rsplit("@", 1)
            X = metric.build_space(metric.parse_recipe(recipe), int(size))
            reg[X.label] = X
            continue
        doc = _read_json(item)
        if isinstance(doc, dict) and "generator" in doc:
            fam = metric.family_from_json(doc)
            reg.update({fam[i].label: fam[i] for i in fam.indices})
        else:
            X = metric.space_from_json(doc)
            reg[X.label] = X
    return reg


def _indices(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"bad index list {text!r}") from None


def _map_family(doc: Any, spaces) -> dict[int, maps.PointMap]:
    """``{"maps": {index: map}}``, or a single map document (index 0)."""
    if isinstance(doc, dict) and "maps" in doc:
        entries = doc["maps"]
        if not isinstance(entries, dict) or not entries:
            raise ValidationError("'maps' must be a non-empty object keyed by index")
        return {int(i): maps.map_from_json(m, spaces) for i, m in entries.items()}
    return {0: maps.map_from_json(doc, spaces)}


def _unitary_family(doc: Any, spaces, tol: float) -> dict[int, unitary.FiniteUnitary]:
    if isinstance(doc, dict) and "unitaries" in doc:
        return {int(i): unitary.unitary_from_json(u, spaces, tol) for i, u in doc["unitaries"].items()}
    return {0: unitary.unitary_from_json(doc, spaces, tol)}


# ---------------------------------------------------------------- commands

def cmd_gen_space(args) -> None:
    recipe = metric.parse_recipe(args.recipe)
    if args.family:
        fam = metric.build_family(recipe, _indices(args.family))
        _emit(args, f"{recipe.name()}-family.json", metric.family_to_json(fam))
        return
    if args.size is None:
        raise ValidationError("gen-space needs a size or --family")
    X = metric.build_space(recipe, args.size)
    _emit(args, f"{X.label}.json", metric.space_to_json(X))


def cmd_profile(args) -> None:
    doc = _read_json(args.input)
    if isinstance(doc, dict) and "generator" in doc:
        fam = metric.family_from_json(doc)
        r_max = args.r_max if args.r_max is not None else max(fam[i].diameter for i in fam.indices)
        out = {
            "generator": fam.generator.to_json(),
            "indices": list(fam.indices),
            "profiles": {str(i): list(metric.bounded_geometry_profile(fam[i], r_max).entries)
                         for i in fam.indices},
            "family_profile": list(metric.family_profile(fam, r_max).entries),
            "nesting_failures": [list(p) for p in metric.nesting_failures(fam)],
        }
    else:
        X = metric.space_from_json(doc)
        r_max = args.r_max if args.r_max is not None else X.diameter
        out = {"label": X.label, "n": X.n, "diameter": X.diameter,
               "profile": list(metric.bounded_geometry_profile(X, r_max).entries),
               "violations": [v.__dict__ for v in metric.validate_metric(X)]}
    _emit(args, "profile.json", out)


def cmd_sparsify(args) -> None:
    spaces = _spaces(args)
    mu, kappa, S = sparsify.instance_from_json(_read_json(args.input), spaces)
    if args.greedy:
        res = sparsify.sparsify_greedy(mu, kappa, S)
    else:
        res = sparsify.sparsify_exact(mu, kappa, S)
    _emit(args, "sparsify.json", res.to_json())


def cmd_roundtrip(args) -> None:
    spaces = _spaces(args)
    fmaps = _map_family(_read_json(args.input), spaces)
    cls = categories.CoarseMorphismClass(fmaps)
    forward = categories.roundtrip_maps(cls, args.block_diameter, args.seed, args.c)
    ucls = categories.functor_U(cls, args.block_diameter, args.seed)
    backward = categories.roundtrip_unitaries(ucls, args.block_diameter, args.seed, args.c)
    _emit(args, "roundtrip.json", {"maps": forward.to_json(), "unitaries": backward.to_json()})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "closeness_F_U_f", "covering_C", "limit_2C", "prop_Ustar_UFU"])
    for i in forward.indices:
        w.writerow([i, forward.bounds[i], forward.certificates[i], forward.limit, backward.bounds[i]])
    path = Path(args.out) / "roundtrip.csv"
    write_atomic(path, buf.getvalue())
    print(path)


def cmd_extract_map(args) -> None:
    spaces = _spaces(args)
    us = _unitary_family(_read_json(args.input), spaces, args.tol_norm)
    out = {}
    for i, U in sorted(us.items()):
        if args.support:
            f = rigidity.extract_map_support(U, args.tol_support)
            out[str(i)] = {"map": f.to_json(), "method": "support", "eta": args.tol_support}
        else:
            ex = rigidity.extract_map_threshold(U, args.c)
            out[str(i)] = {**ex.to_json(), "method": "threshold"}
    _emit(args, "extract-map.json", out["0"] if list(out) == ["0"] else {"maps": out})


def cmd_cover(args) -> None:
    spaces = _spaces(args)
    if args.map is not None:
        # verify an existing unitary against a map
        U = unitary.unitary_from_json(_read_json(args.input), spaces, args.tol_norm)
        f = maps.map_from_json(_read_json(args.map), spaces)
        cert = rigidity.verify_covers(U, f, args.block_diameter, args.tol_support)
        _emit(args, "cover.json", {"certificate": cert.to_json()})
        return
    f = maps.map_from_json(_read_json(args.input), spaces)
    if args.block_diameter is None:
        raise ValidationError("building a covering unitary needs --block-diameter")
    cov = rigidity.covering_unitary(f, args.block_diameter, args.seed)
    _emit(args, "cover.json", {**cov.to_json(), "unitary": cov.unitary.to_json()})


def cmd_probe_orthsum(args) -> None:
    spaces = _spaces(args)
    doc = _read_json(args.input)
    ops_doc = doc.get("operators") if isinstance(doc, dict) else doc
    if not isinstance(ops_doc, list) or not ops_doc:
        raise ValidationError("expected a non-empty list of operators")
    ops = [band.operator_from_json(o, spaces) for o in ops_doc]
    X = ops[0].row_space
    A = band.SubsetProjection(X, _indices(args.A))
    B = band.SubsetProjection(X, _indices(args.B))
    _emit(args, "probe-orthsum.json", band.orthogonal_sum_probe(ops, A, B).to_json())


def cmd_audit_locality(args) -> None:
    spaces = _spaces(args)
    us = _unitary_family(_read_json(args.input), spaces, args.tol_norm)
    if len(us) > 1:
        rep = rigidity.family_locality_audit(us, args.delta, args.fiber)
        _emit(args, "audit-locality.json", rep.to_json())
        return
    rep = rigidity.locality_audit(us[0] if 0 in us else next(iter(us.values())), args.delta,
                                  args.r_max, args.fiber)
    _emit(args, "audit-locality.json", rep.to_json())


# ------------------------------------------------------------------ parser

def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--tol-norm", type=_positive, default=unitary.UNITARY_TOL,
                        help="unitarity tolerance for loaded unitaries")
    common.add_argument("--tol-support", type=_positive, default=rigidity.SUPPORT_FLOOR,
                        help="numerical zero for support reads")
    common.add_argument("--space", action="append", metavar="FILE|RECIPE@SIZE",
                        help="space or family file (repeatable); recipe labels resolve automatically")

    p = argparse.ArgumentParser(prog="coarsekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-space", parents=[common], help="build a space or a family of truncations")
    g.add_argument("recipe", help="path, grid2, kgrid2, tree2, cayley:Z2, ...")
    g.add_argument("size", type=int, nargs="?")
    g.add_argument("--family", help="comma-separated truncation sizes")
    g.set_defaults(func=cmd_gen_space)

    g = sub.add_parser("profile", parents=[common], help="bounded-geometry profile of a space or family")
    g.add_argument("input")
    g.add_argument("--r-max", type=int)
    g.set_defaults(func=cmd_profile)

    g = sub.add_parser("sparsify", parents=[common], help="solve a sparsification instance")
    g.add_argument("input")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", default=True)
    mode.add_argument("--greedy", action="store_true")
    g.set_defaults(func=cmd_sparsify)

    g = sub.add_parser("roundtrip", parents=[common], help="functor round trips on a map family")
    g.add_argument("input")
    g.add_argument("--block-diameter", type=int, default=0)
    g.add_argument("--c", type=float, default=0.1)
    g.set_defaults(func=cmd_roundtrip)

    g = sub.add_parser("extract-map", parents=[common], help="extract a map from a unitary")
    g.add_argument("input")
    g.add_argument("--c", type=float, default=0.1)
    g.add_argument("--support", action="store_true", help="use the support rule with --tol-support")
    g.set_defaults(func=cmd_extract_map)

    g = sub.add_parser("cover", parents=[common],
                       help="'cover U.json f.json' verifies; 'cover f.json --block-diameter D' builds")
    g.add_argument("input")
    g.add_argument("map", nargs="?")
    g.add_argument("--block-diameter", type=int)
    g.set_defaults(func=cmd_cover)

    g = sub.add_parser("probe-orthsum", parents=[common], help="orthogonal-family compression probe")
    g.add_argument("input")
    g.add_argument("--A", required=True, help="comma-separated points")
    g.add_argument("--B", required=True, help="comma-separated points")
    g.set_defaults(func=cmd_probe_orthsum)

    g = sub.add_parser("audit-locality", parents=[common], help="locality spread S(R, delta)")
    g.add_argument("input")
    g.add_argument("--delta", type=_positive, default=0.1)
    g.add_argument("--r-max", type=int)
    g.add_argument("--fiber", choices=("v0", "all"), default="v0")
    g.set_defaults(func=cmd_audit_locality)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PipelineRejection as exc:
        report = {"error": str(exc), "kind": type(exc).__name__}
        for attr in ("obstruction", "witness", "point", "index", "pair"):
            if getattr(exc, attr, None) is not None:
                report[attr] = getattr(exc, attr)
        print(json.dumps(report, sort_keys=True, default=str), file=sys.stderr)
        return EXIT_REJECTED
    return 0


if __name__ == "__main__":
    sys.exit(main())
