"""Finite-population randomization inference.

Exact design moments, condition diagnostics, and normal/chi-square
calibrated tests for completely randomized experiments, treating potential
outcomes as fixed and the random assignment as the only source of noise.
"""

from .designs import (
    DEFAULT_ENUM_CAP,
    FactorialSpec,
    cluster_expand,
    compute_delta,
    derive_rng,
    draw_partition,
    draw_partition_batch,
    draw_rerandomized,
    draw_srs,
    enumerate_partitions,
    enumeration_cap,
    factorial_contrasts,
    indicator_cov,
    multinomial_count,
)
from .errors import (
    DegenerateInputError,
    EnumerationCapError,
    FinpopError,
    InternalCheckError,
    RejectionLimitError,
    SingularMatrixError,
    TieError,
    ValidationError,
)
from .estimators import (
    EstimateReport,
    WaldRegion,
    arm_sizes,
    cluster_adjusted,
    cov_estimator,
    factorial_effects,
    factorial_null_moments,
    finite_pop_ls,
    fit_ls_coefs,
    neyman_ci,
    neyman_cov_true,
    regression_adjusted,
    tau_hat,
    tau_true,
    wald_region,
)
from .ivconf import (
    IVConditionStat,
    IVSummary,
    QuadraticSet,
    adjusted_stat,
    classify_quadratic,
    iv_condition_stat,
    iv_confidence_set,
    iv_summary,
)
from .popstats import (
    CovStructure,
    CREConditionStats,
    PopMoments,
    cre_condition_stats,
    hajek_condition_stat,
    lindeberg_stat,
    partition_condition_stat,
    pop_moments,
    pot_cov_structure,
    srs_mean_var,
    unit_contrasts,
)
from .randtests import (
    JointTestResult,
    TestResult,
    diff_in_means_stat,
    dose_rank_stat,
    exact_randomization_pvalue,
    extreme_rank_stats,
    hypergeom_test,
    joint_test,
    kruskal_wallis,
    mc_randomization_pvalue,
    rank_null_cov,
    rank_stat_normal_pvalue,
    rank_transform,
    standardized_rank_means,
    wilcoxon_stat,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "FinpopError",
    "ValidationError",
    "DegenerateInputError",
    "TieError",
    "SingularMatrixError",
    "EnumerationCapError",
    "RejectionLimitError",
    "InternalCheckError",
    # population statistics
    "PopMoments",
    "CovStructure",
    "CREConditionStats",
    "pop_moments",
    "srs_mean_var",
    "hajek_condition_stat",
    "partition_condition_stat",
    "lindeberg_stat",
    "unit_contrasts",
    "pot_cov_structure",
    "cre_condition_stats",
    # designs
    "DEFAULT_ENUM_CAP",
    "derive_rng",
    "draw_partition",
    "draw_partition_batch",
    "draw_srs",
    "multinomial_count",
    "enumeration_cap",
    "enumerate_partitions",
    "indicator_cov",
    "FactorialSpec",
    "factorial_contrasts",
    "compute_delta",
    "draw_rerandomized",
    "cluster_expand",
    # estimators
    "EstimateReport",
    "WaldRegion",
    "arm_sizes",
    "tau_true",
    "tau_hat",
    "neyman_cov_true",
    "cov_estimator",
    "wald_region",
    "neyman_ci",
    "regression_adjusted",
    "fit_ls_coefs",
    "finite_pop_ls",
    "cluster_adjusted",
    "factorial_effects",
    "factorial_null_moments",
    # randomization tests
    "TestResult",
    "JointTestResult",
    "rank_transform",
    "diff_in_means_stat",
    "wilcoxon_stat",
    "standardized_rank_means",
    "rank_null_cov",
    "kruskal_wallis",
    "joint_test",
    "extreme_rank_stats",
    "dose_rank_stat",
    "rank_stat_normal_pvalue",
    "hypergeom_test",
    "mc_randomization_pvalue",
    "exact_randomization_pvalue",
    # instrumental variables
    "IVSummary",
    "QuadraticSet",
    "IVConditionStat",
    "iv_summary",
    "adjusted_stat",
    "classify_quadratic",
    "iv_confidence_set",
    "iv_condition_stat",
]
