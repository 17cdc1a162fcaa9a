"""U- and V-statistics of stationary mixing sequences.

Process models with computable absolute-regularity coefficients, bounded
kernels with projections and long-run variance, exact and Monte Carlo
statistic evaluation, proximity-graph counting bounds with factorization
audits, rate-condition evaluation, and a CLT verification harness.
"""

from .conditions import (
    ConditionReport,
    RateModel,
    block_schedule,
    tc_terms,
    theorem1_terms,
    theorem2_check,
    variance_scaling_estimate,
)
from .depgraph import (
    FactorizationGap,
    GraphBounds,
    GraphSpec,
    adjacent,
    covariance_gap,
    factorization_gap,
    gamma,
    m_bound,
    neighborhood_bound,
    neighborhood_count,
    q_bound,
    strong_set_bound,
)
from .errors import (
    BudgetExceededError,
    ConfigError,
    DegenerateVarianceError,
    PreconditionError,
    SpecError,
    UvstatError,
)
from .kernels import (
    Kernel,
    ProjectionResult,
    builtin_kernel,
    hoeffding_projection,
    make_kernel,
    yoshihara_sigma2,
)
from .mc import (
    ExperimentConfig,
    ExperimentResult,
    ks_distance,
    normal_cdf,
    normal_moment,
    run_experiment,
)
from .process import (
    BetaProfile,
    BetaValue,
    FiniteMarkov,
    IIDDiscrete,
    IIDUniform01,
    MDependentWindow,
    beta_coefficient,
    sample_path,
    sample_paths,
    stationary_distribution,
    two_state_chain,
)
from .stats import (
    MomentPair,
    StatisticConfig,
    classical_u,
    exact_moments,
    standardize,
    u_statistic,
    v_statistic,
)

__version__ = "0.1.0"
