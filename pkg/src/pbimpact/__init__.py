"""Impact and novelty analytics for participatory budgeting elections.

The package parses Pabulib-style ``.pb`` election files, computes winning
outcomes under utilitarian greedy and the method of equal shares (with the
add1/add1u budget-increment completions), evaluates a portfolio of impact
and novelty metrics at the outcome and ballot level, and aggregates losses,
correlations, paired t-tests and a conjoint regression over whole corpora.

All money arithmetic is exact rational; statistics are floating point.
"""

from .analysis import (
    DEFAULT_COMBOS,
    AnalysisConfig,
    ConjointDataset,
    CorpusReport,
    InstanceReport,
    build_conjoint_dataset,
    export_report,
    load_report,
    run_corpus,
    run_instance,
)
from .errors import PbImpactError
from .metrics import (
    AreaSlice,
    MetricCalc,
    MetricKey,
    MetricLevel,
    MetricScope,
    MetricUnit,
    MetricValue,
    all_metric_keys,
    area_slice,
    ballot_slice,
    beneficiary_representation,
    budget_utilization,
    impact_value,
    loss,
    novelty_value,
    relative_loss,
    top_n_selection_rate,
)
from .model import (
    Ballot,
    Beneficiary,
    ImpactArea,
    Instance,
    Project,
    ProposalRatios,
    QuartileKind,
    QuartileLabel,
    VoteType,
    assign_quartile_labels,
    popularity,
    popularity_by_project,
    proposal_ratios,
)
from .pabulib import (
    RawPbFile,
    ScanEntry,
    parse_instance,
    scan_corpus,
    serialize_instance,
)
from .rationals import format_rational, parse_rational
from .rules import (
    COMPLETION_PAYER,
    ExclusivePair,
    Outcome,
    RuleId,
    equal_shares_add1,
    equal_shares_add1u,
    equal_shares_core,
    exclusive_winners,
    outcome_from_winners,
    utilitarian_greedy,
)
from .stats import (
    LossSummary,
    OlsFit,
    TestResult,
    ols_fit,
    paired_t_test,
    pearson,
    student_t_cdf,
    summarize_losses,
)

__version__ = "0.1.0"
