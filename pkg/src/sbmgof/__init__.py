"""Goodness-of-fit testing and community-count estimation for stochastic block models."""

from .errors import (
    DegenerateBootstrapError,
    DegenerateClusterError,
    EdgeListParseError,
    NumericError,
    ParameterError,
    SbmGofError,
)
from .gof import (
    GofTestResult,
    ResidualMatrix,
    bootstrap_corrected_test,
    estimate_block_matrix,
    fit_null,
    gof_test,
    oracle_residual_matrix,
    residual_matrix,
)
from .netgen import (
    AdjacencyGraph,
    BlockMatrix,
    DcbmParams,
    Membership,
    MmbmParams,
    generate_dcbm,
    generate_mmbm,
    generate_sbm,
    largest_connected_component,
    read_edge_list,
    sample_dirichlet_rows,
    write_edge_list,
)
from .rng import SeededRng
from .select import KEstimateResult, PowerLawThreshold, QuantileThreshold, estimate_k
from .spectral import EigenExtremes, leading_singular_subspace, spectral_clustering, symmetric_extreme_eigenvalues
from .tracy_widom import Tw1Distribution, load_tw1, tw1_cdf, tw1_moments, tw1_quantile

__version__ = "0.1.0"
