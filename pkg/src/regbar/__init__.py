"""Country-year regulatory barrier scores from firm entry/report panels.

The package turns a firm x country x year panel of three-valued
entry/report codes into latent per-country-per-year barrier levels via a
data-augmented Gibbs sampler whose path updates run through a forward
filter and backward sampler. A text front end builds the panel from
filing text plus external classifier labels, and a synthetic generator
provides ground truth for recovery checks.
"""

__version__ = "0.1.0"

from .diagnostics import (
    PosteriorSummary,
    effective_sample_size,
    split_rhat,
    summarize_posterior,
)
from .distributions import (
    TruncationInterval,
    normal_cdf,
    sample_normal,
    sample_truncated_normal,
)
from .errors import (
    ConfigError,
    CoverageError,
    DomainError,
    EmptyPanelError,
    IntegrityError,
    InternalStateError,
    ParseError,
    RegbarError,
)
from .ffbs import (
    EvolutionConfig,
    FilterMoments,
    SliceStatistics,
    backward_sample,
    forward_filter,
    sample_country_path,
)
from .gibbs import (
    ChainState,
    CutoffPair,
    DrawStore,
    PriorConfig,
    SamplerConfig,
    gibbs_sweep,
    init_chain_state,
    run_chains,
    sample_entry_cutoff,
    sample_latent,
    sample_report_cutoff,
)
from .panel import (
    ExclusionConfig,
    ObservationCode,
    Panel,
    apply_exclusions,
    load_panel,
    save_panel,
    summarize_panel,
)
from .synthgen import (
    SyntheticPanel,
    TruthSet,
    generate_panel,
    make_truth,
    simulate_barrier_paths,
    simulate_dataset,
    simulate_decision,
)
from .extraction import (
    CandidateSentence,
    ClassifierMetrics,
    ConfusionCounts,
    FilingDocument,
    Gazetteer,
    aggregate_to_panel,
    build_panel_from_filings,
    classifier_metrics,
    filter_candidates,
    index_country_mentions,
    merge_labels,
    split_sentences,
)
