"""Growth-rate inference for supercritical birth-death processes.

Simulate sample genealogies through their coalescent-point-process
representation, estimate the net growth rate r = birth - death from the
coalescence times (calibrated pairwise-difference estimators, internal
branch lengths, logistic maximum likelihood), attach quantile-calibrated
confidence intervals, and ingest real ultrametric trees from Newick files.
"""

from .calibration import (
    ConstantsRow,
    MomentChecks,
    SnSample,
    build_constants_row,
    build_constants_table,
    c_bias,
    c_inv_closed_form,
    c_inv_monte_carlo,
    c_mse,
    load_constants_table,
    moment_identities_check,
    sample_sn,
    sn_quantiles,
    write_constants_table,
)
from .coalescent import (
    BirthDeathParams,
    CoalescenceTimes,
    ExactFiniteT,
    FixedNLimit,
    LargeN,
    delta_t,
    sample_coalescence_times,
    sample_coalescence_times_block,
    sample_h_exact,
    sample_q,
    sample_u_given_q,
    sample_y,
)
from .confidence import ConfidenceSpec, confidence_interval, coverage_study, make_regime
from .errors import (
    BdGrowthError,
    BranchOrderUnknown,
    DegenerateTimes,
    InsufficientReplicates,
    MismatchedN,
    MissingBranchLength,
    NonConvergence,
    NotBinary,
    NotUltrametric,
    ParseError,
    RelativeAxisError,
    SampleTooSmall,
)
from .estimators import (
    Estimate,
    MleFit,
    PairwiseStatistic,
    estimate_lengths,
    estimate_mle,
    estimate_pairwise,
    internal_branch_length,
    pairwise_statistic,
    raw_pairwise_point,
)
from .rng import RngStream
from .treeio import (
    SampleTree,
    TreeNode,
    build_cpp_tree,
    extract_coalescence_times,
    parse_newick,
    parse_newick_trees,
    serialize_newick,
    tree_internal_branch_length,
)

__version__ = "0.1.0"
