"""jordanflow: Jordan-decomposition analysis of linear flows.

Decomposes traceless matrices (continuous time) or unimodular matrices
(discrete time) into commuting elliptic / hyperbolic / nilpotent-or-unipotent
parts and turns the decomposition into dynamics: finest Morse decompositions
on projective spaces and flag manifolds, recurrence and chain-recurrence
classification, Bruhat-cell stable sets, structural-stability verdicts, and
Floquet theory for periodic coefficients.  Every combinatorial prediction
can be cross-checked against numerical simulation.
"""

from .errors import (
    BranchObstruction,
    DimensionTooLarge,
    GridTooLarge,
    IllConditioned,
    InputError,
    JordanFlowError,
    NoRealLog,
    NonConvergence,
    NotElliptic,
    NotNilpotent,
    Overflow,
    RankAmbiguous,
    Singular,
    StiffnessSuspected,
)
from .matrixcore import (
    SpectralCluster,
    SpectralData,
    TolerancePolicy,
    complex_spectrum,
    matrix_exp,
    nilpotency_index,
    principal_log,
    spectral_radius,
    unipotent_log,
)
from .jordan import (
    AdditiveJordan,
    InvariantMetric,
    MultiplicativeJordan,
    additive_jordan,
    flow_at,
    invariant_metric,
    multiplicative_jordan,
    sn_decompose,
    wedge_infinitesimal,
    wedge_representation,
)
from .projective import (
    ChainGraph,
    ProjectiveMorseDecomposition,
    ProjectivePoint,
    chain_oracle,
    chain_recurrent_membership,
    morse_components_projective,
    projective_distance,
    recurrent_membership,
    simulate_projective,
    stable_set_index,
    unipotent_limit,
    unstable_set_index,
)
from .flags import (
    Flag,
    FlagMorseComponent,
    FlagType,
    FlowClassification,
    bruhat_cell,
    classify_flow,
    component_dimensions,
    enumerate_morse_components,
    flag_recurrent_membership,
    height_lyapunov,
    plucker_embed,
    rate_filtration,
    simulate_flag,
    unstable_bruhat_cell,
)
from .floquet import (
    FloquetData,
    FundamentalSolution,
    PeriodicCoefficient,
    floquet_data,
    floquet_generator,
    floquet_lyapunov,
    floquet_morse_components,
    integrate_fundamental,
    periodic_factor,
    skew_step,
)

__version__ = "0.1.0"
