"""Knowledge-graph embedding with automatically mined logic rules.

The package mines inference, transitivity, and antisymmetry rules from a
triple store, grounds them over the concrete facts, and trains translation
embeddings (TransE / TransH / TransR) jointly over triples and ground rules
under a gated margin-ranking loss.  Link prediction (raw and filtered
MR / MRR / Hits@n) and triple classification round out the pipeline.

See :mod:`rulekge.cli` for the command-line entry points and
:mod:`rulekge.engine` for the compiled/pure-Python backend split.
"""

from .kg import (
    DatasetSplits,
    KnowledgeGraph,
    ParseError,
    Triple,
    Vocabulary,
    build_graph,
    contains,
    filter_subset,
    load_splits,
    parse_triple_file,
)
from .mining import (
    ConceptHierarchy,
    GroundRule,
    Rule,
    RuleCandidate,
    RuleType,
    aggregate_candidates,
    extract_samples,
    get_new_triples,
    ground,
    mine_rules,
    orient_inference,
    score_candidates,
    select_rules,
)
from .models import (
    ModelKind,
    ModelParams,
    Norm,
    gradients,
    init_params,
    project_entity,
    score_antisymmetry_rule,
    score_inference_rule,
    score_transitivity_rule,
    score_triple,
)
from .training import (
    TrainConfig,
    TrainingSample,
    hinge_term,
    make_training_set,
    project_norms,
    sample_negative,
    sgd_epoch,
    train,
)
from .evaluation import (
    LabeledTriple,
    LPMetrics,
    RankResult,
    TCMetrics,
    ThresholdTable,
    fit_thresholds,
    generate_tc_negatives,
    link_prediction,
    rank_entity,
    triple_classification,
)

__version__ = "0.1.0"
