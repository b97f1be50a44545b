"""Cocycles, projective representations and convergence certificates
for discrete abelian groups.

The package splits into five layers: groups and boxes (groups), 2-cocycles
and bilinear maps (cocycles), representations and truncated vectors (reps),
the certified series engine (series), the convergence diagnostics built on
top of it (convergence), and inner/outer certificates for product actions
(actions).  The cli module exposes every diagnostic as a subcommand with
deterministic JSON/CSV reports.
"""

from .groups import (
    Element,
    FiniteAbelianGroup,
    FolnerBox,
    Group,
    GroupMismatchError,
    IntegerLattice,
    SupNormExhaustion,
    l1_norm,
    sample_elements,
    sup_norm,
)
from .cocycles import (
    BilinearMap,
    CoboundaryCocycle,
    COBOUNDARY,
    Cocycle,
    CocycleSequence,
    CoboundaryVerdict,
    ConstructionError,
    INCONCLUSIVE,
    MatrixBilinear,
    MatrixCocycle,
    NOT_COBOUNDARY,
    ProductCocycle,
    TableBilinear,
    TableCocycle,
    UnsupportedVariantError,
    bilinearity_residual,
    canonicalize_phases,
    check_cocycle_identity,
    coboundary_test,
    cocycle_from_bilinear,
    commutator_bicharacter,
    conjugate_cocycle,
    constant_sequence,
    evaluate,
    flatten_matrix_cocycle,
    geometric_matrix_sequence,
    lift_bilinear,
    one_free_coboundary_sequence,
    partial_product,
    pauli_cocycle,
    pauli_sigma,
    perturb,
    quadratic_phase,
    sample_triples,
    sign_cocycle_z2,
    trivial_cocycle,
)
from .reps import (
    CCRPair,
    DIMENSION_CAP,
    DimensionCapError,
    FellReport,
    ProjectiveRep,
    TruncatedVector,
    box_vector,
    ccr_pair,
    ccr_to_projective,
    fell_absorption_check,
    pauli_rep,
    point_mass,
    projective_relation_check,
    regular_rep,
    regular_rep_matrix,
    rep_inner_product,
    spectral_multiset_distance,
    tensor_rep,
    twisted_inner_product,
    unitarity_residual,
    weak_containment_overlap,
)
from .series import (
    EXACT,
    ExplicitModel,
    GeometricModel,
    INCONCLUSIVE as SERIES_INCONCLUSIVE,
    InvalidInnerProductError,
    MAJORANT,
    MINORANT,
    PROVED_CONVERGENT,
    PROVED_DIVERGENT,
    PowerModel,
    SeriesVerdict,
    TailModel,
    diagnose_model_series,
    diagnose_terms,
    geometric_tail,
    neumaier_sum,
    poly_geometric_tail,
    power_tail,
    running_sums,
    series_table,
)
from .convergence import (
    BoxCriteria,
    CERTIFIED,
    ClauseReport,
    DirichletReport,
    ProductDiagnosis,
    REFUTED,
    SelectionError,
    SelectionReport,
    SelectionStep,
    TwistedRepSeries,
    UNDETERMINED,
    box_defect,
    box_defect_terms,
    box_sup_distance,
    box_twist_mean,
    dirichlet_condition,
    dirichlet_value,
    gauge_fix,
    geometric_box_family,
    geometric_matrix_family,
    inner_product_series,
    lattice_tensor_criteria,
    modulus_deficit_series,
    power_box_family,
    power_matrix_family,
    product_diagnose,
    select_product_subsequence,
    translation_series,
    twisted_rep_series,
)
from .actions import (
    ActionScenario,
    ActionVerdict,
    INNER_CERTIFIED,
    NOT_OBSTRUCTED,
    OBSTRUCTED,
    OUTER_CERTIFIED,
    ObstructionReport,
    cohomological_obstruction,
    extension_condition,
    inner_outer_verdict,
    regular_trace_scenario,
    rep_trace_scenario,
    scenario_from_regular_vectors,
    scenario_from_rep_vectors,
    scenario_from_values,
    trace_condition,
)

__version__ = "0.1.0"
