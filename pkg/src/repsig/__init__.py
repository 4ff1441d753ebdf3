"""Sequential A/B-test plans with early stopping via repeated significance.

Construct a test plan that partitions the Type I budget over criteria,
decision points, and subtests; monitor a p-value stream against it; and
verify error rates by Monte Carlo simulation.
"""

from .alpha_spend import (
    AlphaPartition,
    FinalWeightedConfig,
    GeometricSpendConfig,
    final_weighted_partition,
    geometric_entry,
    geometric_partition,
    uniform_partition,
)
from .errors import (
    ConfigError,
    DomainError,
    PlanInvalidError,
    RepsigError,
    SchemaError,
    SequencingError,
    StateError,
)
from .monitor import (
    Decision,
    MonitorState,
    Outcome,
    SignificanceRecord,
    hit_requirement_remaining,
    init_monitor,
    run_monitor,
    update,
)
from .planio import (
    PlanDocument,
    dump_plan_document,
    dump_pvalue_log,
    load_plan_document,
    load_pvalue_log,
    plan_from_dict,
    plan_hash,
    plan_to_dict,
)
from .plans import (
    CriterionSchedule,
    PlanVariant,
    Subtest,
    TestPlan,
    UnlimitedPlan,
    canonical_unlimited_subtests,
    require_valid,
    subtest_test_plan,
    subtest_thresholds,
    threshold,
    uniform_fixed_plan,
    uniform_rate_plan,
    unlimited_test_plan,
    validate_plan,
)
from .simulate import (
    BernoulliDiffStream,
    GaussianStream,
    RunningStats,
    SimulationReport,
    StreamConfig,
    compare_always_valid,
    required_n_for_z,
    run_trials,
    running_pvalue,
)
from .stats_core import (
    AlwaysValidParams,
    EffectModel,
    SignificancePoint,
    always_valid_curve,
    always_valid_min,
    always_valid_z,
    p_from_z_two_sided,
    required_z_by_rate,
    required_z_uniform,
    rho_for_min_at,
    sample_size_ratio,
    std_normal_cdf,
    std_normal_quantile,
    z_from_p_two_sided,
)

__version__ = "0.1.0"
