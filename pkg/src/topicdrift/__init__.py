"""Exploration metrics over publication corpora.

Computes per-author exploration propensity and exploration distance from
weighted topic graphs, and provides the statistical toolkit around them:
regressions, four-group analysis, propensity-score matching/weighting,
null models, mediation and a planted-effect synthetic corpus generator.
"""

__version__ = "1.0.0"

from .corpus import (
    AuthorCareer,
    CodeScheme,
    Corpus,
    CorpusError,
    EligibilityFilter,
    FULL,
    Paper,
    load_corpus,
    write_corpus,
)
from .topicgraph import (
    DistanceProvider,
    TopicGraph,
    build_citation,
    build_cociting,
    build_cooccurrence,
    build_graph,
    period_stability,
)
from .metrics import (
    LookbackWindow,
    SplitPoint,
    assign_groups,
    build_rows,
    cohort_compare,
    ed,
    ep,
    group_transitions,
    log_citations,
    paper_distance,
    split_author,
    temporal_trajectories,
)
from .stats import (
    boosted_stumps_fit,
    build_design,
    e_value,
    kruskal_wallis,
    ks_two_sample,
    logistic_fit,
    mediation,
    ols_fit,
    run_model,
    standardized_coef,
)
from .causal import (
    drastic_change_analysis,
    log_to_percent,
    null_author_shuffle,
    null_paper_shuffle,
    perturb_gaussian,
    psm,
    psw_ate,
    psw_att,
)
from .synth import SyntheticConfig, generate_synthetic
