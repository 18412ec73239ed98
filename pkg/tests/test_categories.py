from __future__ import annotations

import numpy as np
import pytest

from coarsekit.categories import (CoarseMorphismClass, UnitaryMorphismClass, compose_map_classes,
                                  compose_unitary_classes, functor_F, functor_U, functoriality_defects,
                                  identity_map_class, identity_unitary_class, roundtrip_maps,
                                  roundtrip_report, roundtrip_unitaries, unitaries_close, unitary_closeness)
from coarsekit.corpus import coarse_families, doubling, halving
from coarsekit.errors import CoveringError, ExtractionError, ValidationError
from coarsekit.maps import BOUNDED, PointMap, closeness_constant
from coarsekit.metric import Recipe, build_space
from coarsekit.unitary import FiniteUnitary, identity_unitary, permutation_unitary, random_unitary

PATH = Recipe("path")
SIZES = (8, 16, 32)


def P(n):
    return build_space(PATH, n)


def cls_of(fn, sizes=SIZES):
    return CoarseMorphismClass({n: fn(n) for n in sizes})


def test_closeness_examples():
    U = random_unitary(P(6), k=2, seed=1)
    phases = np.exp(1j * np.linspace(0, 3, 12))
    V = FiniteUnitary(U.domain, U.codomain, 2, 2, U.matrix @ np.diag(phases))
    assert unitary_closeness(U, V) == 0
    assert unitaries_close(U, U, 0).close
    X = P(6)
    rev = permutation_unitary(PointMap(X, X, np.arange(6)[::-1]))
    rep = unitaries_close(identity_unitary(X), rev, 2)
    assert rep.propagation == 5 and not rep.close
    with pytest.raises(ValidationError):
        unitary_closeness(U, identity_unitary(X))


def test_functor_U_on_identity_class():
    ucls = functor_U(identity_map_class({n: P(n) for n in SIZES}), 0)
    ident = identity_unitary_class({n: P(n) for n in SIZES})
    for n in SIZES:
        assert unitary_closeness(ucls[n], ident[n]) == 0


def test_functor_F_on_identity_class():
    mcls = functor_F(identity_unitary_class({n: P(n) for n in SIZES}, k=3))
    for n in SIZES:
        assert closeness_constant(mcls[n], PointMap(P(n), P(n), np.arange(n))) == 0
    assert mcls.uniformity.verdict == BOUNDED


def test_identity_laws():
    f = cls_of(doubling)
    left = compose_map_classes(identity_map_class({n: P(2 * n) for n in SIZES}), f)
    right = compose_map_classes(f, identity_map_class({n: P(n) for n in SIZES}))
    for n in SIZES:
        assert left[n] == f[n] == right[n]
    U = functor_U(f, 1)
    ident_dom = identity_unitary_class({n: P(n) for n in SIZES}, k=U[8].k_dom)
    ident_cod = identity_unitary_class({n: P(2 * n) for n in SIZES}, k=U[8].k_cod)
    for n in SIZES:
        assert unitary_closeness(compose_unitary_classes(U, ident_dom)[n], U[n]) == 0
        assert unitary_closeness(compose_unitary_classes(ident_cod, U)[n], U[n]) == 0


def test_representatives_of_one_class_stay_close():
    f = cls_of(doubling)
    a, b = functor_U(f, 1, seed=0), functor_U(f, 1, seed=100)
    values = [unitary_closeness(a[n], b[n]) for n in SIZES]
    C = max(c.certificate.C for c in a.coverings.values())
    assert all(v <= 2 * C for v in values)
    assert not np.allclose(a[8].dense, b[8].dense)  # different seeds, different blocks
    ma, mb = functor_F(a), functor_F(b)
    assert all(closeness_constant(ma[n], mb[n]) <= 2 * C for n in SIZES)


def test_functoriality_doubling_then_halving():
    A, B = functor_U(cls_of(halving), 0), functor_U(cls_of(doubling), 1)
    defects = functoriality_defects(A, B)
    assert set(defects) == set(SIZES)
    assert all(d <= 2 for d in defects.values())
    composite = compose_map_classes(cls_of(halving), cls_of(doubling))
    for n in SIZES:
        assert closeness_constant(composite[n], PointMap(P(n), P(n), np.arange(n))) == 0


def test_uncertified_extraction_names_the_index():
    dense = UnitaryMorphismClass({8: identity_unitary(P(8)), 16: random_unitary(P(16), seed=2)})
    with pytest.raises(ExtractionError) as info:
        functor_F(dense, c=0.9)
    assert info.value.index == 16 and "index 16" in str(info.value)
    with pytest.raises(ExtractionError) as info:
        functor_F(dense, method="support", eta=0.9)
    assert info.value.index == 16


def test_unknown_extraction_method():
    with pytest.raises(ValidationError):
        functor_F(identity_unitary_class({8: P(8)}), method="magic")


def test_covering_failure_names_the_index():
    const = CoarseMorphismClass({8: PointMap(P(8), P(2), np.array([0] * 7 + [1]))})
    with pytest.raises(CoveringError) as info:
        functor_U(const, 0)
    assert info.value.obstruction["index"] == 8


def test_roundtrip_reports_on_corpus():
    for fam in coarse_families(SIZES):
        rep = roundtrip_maps(fam.morphisms, fam.block_diameter)
        assert rep.holds and rep.verdict == BOUNDED
        assert all(b <= rep.limit for b in rep.bounds.values())
        ucls = functor_U(fam.morphisms, fam.block_diameter, seed=7)
        back = roundtrip_unitaries(ucls, fam.block_diameter, seed=7)
        assert back.holds and back.verdict == BOUNDED
        assert roundtrip_report(fam.morphisms, fam.block_diameter).to_json() == rep.to_json()


def test_roundtrip_report_shapes():
    rep = roundtrip_maps(cls_of(doubling), 1)
    doc = rep.to_json()
    assert doc["bounds"] == {"8": 1, "16": 1, "32": 1} and doc["limit"] == 2
    assert rep.csv_rows()[0] == [8, 1, 1, 2]
    with pytest.raises(ValidationError):
        roundtrip_report(object(), 0)
