"""Desk-scale coarse geometry: finite metric families, band operators,
sparsification, and the correspondence between coarse maps and unitaries."""
from __future__ import annotations

from .band import (BandOperator, SubsetProjection, compress, operator_norm, orthogonal_sum_probe,
                   random_band, rank_one_unit)
from .categories import (CoarseMorphismClass, FunctorReport, UnitaryMorphismClass, functor_F, functor_U,
                         roundtrip_report, unitaries_close)
from .errors import CoarsekitError, PipelineRejection, ValidationError
from .maps import (BOUNDED, DIVERGENT, INCONCLUSIVE, CoarseEquivalenceCertificate, ControlFunction,
                   PointMap, closeness_constant, expansion_profile, family_uniformity,
                   verify_coarse_equivalence)
from .metric import (FiniteMetricSpace, GeometryProfile, Recipe, SpaceFamily, bounded_geometry_profile,
                     build_family, build_space, load_space, save_space, validate_metric)
from .rigidity import (CoveringCertificate, conjugation_propagation_bound, covering_unitary,
                       coefficient_formula_check, extract_map_support, extract_map_threshold,
                       locality_audit, recover_unitary, verify_covers)
from .sparsify import (Decomposition, MassDistribution, SparsificationResult, sparsify_exact,
                       sparsify_greedy, validate_decomposition, vector_mass)
from .unitary import FiniteUnitary, IsomorphismTable

__version__ = "0.1.0"
