"""Decentralized spectral estimation by iterating independent random
sparsifications of a symmetric matrix, with a synchronous gossip-network
simulator, complexity accounting, projective-chain diagnostics, and an
experiment CLI."""

from . import bounds
from .errors import (
    DegenerateSpectrum,
    DimensionMismatch,
    GossipPcaError,
    InvalidGap,
    MaxRoundsExceeded,
    NoMeetingPoint,
    NonFiniteValue,
    NumericalError,
    RankDeficientGram,
    TargetGapUnreachable,
    ValidationError,
    ZeroInnerProduct,
)
from .linalg import (
    ProjectivePoint,
    Spectrum,
    SymmetricMatrix,
    load_matrix,
    operator_norm,
    proj_distance,
    proj_distance_vec,
    project_orthogonal,
    save_matrix,
    spectral_oracle,
)
from .sparsify import (
    SparseSample,
    Sparsifier,
    SparsifierQuality,
    SparsifyScheme,
    calibrate_scale,
    d_for_theta,
    draw,
    estimate_alpha,
    estimate_theta,
    measure_quality,
)
from .network import (
    ComplexityLedger,
    GossipAvgConfig,
    NetworkState,
    distributed_norm,
    gossip_average,
    gossip_average_detailed,
    spmv_round,
)
from .estimators import (
    EigvalEstimate,
    EigvecEstimate,
    MultiEigvecEstimate,
    Trajectory,
    eigenvalue_from_trajectory,
    estimate_eigenvalue,
    gossip_pca,
    gossip_pca_multi,
    power_iterate_fixed,
    warm_start,
)
from .diagnostics import (
    ContractionReport,
    StationarityReport,
    absorbing_escapes,
    measure_contraction,
    measure_mixing,
    sample_in_good_set,
    variance_of_time_average,
)
from .experiments import (
    ExperimentConfig,
    MdsInstance,
    make_mds,
    make_synthetic,
    run_positioning,
    run_tradeoff,
    run_warmstart_table,
    subspace_delta,
)
from .cli import cli_main

__version__ = "0.1.0"
