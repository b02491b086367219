"""seqlab: a data-programming workbench for event-coded video corpora.

Workflow: ingest event sequences, mine frequent patterns as labeling
templates, refine each template into description-length clusters, retrieve
similar videos, apply labels in batches, retrain an interim classifier,
and measure labeling efficiency against active-learning baselines.
"""

from .dataset import (
    ingest_dataset,
    ingest_dir,
    read_labels,
    read_projection,
    write_dataset,
    write_labels,
    write_projection,
)
from .labels import LabelEvent, LabelState, LabelStore, fold_events
from .mindl import (
    BandParams,
    Cluster,
    ClusterPartition,
    EditScript,
    apply_edits,
    assign_roles,
    cluster,
    description_length,
    edit_alignment,
    edit_cost,
    edit_distance,
    lsh_buckets,
)
from .mining import (
    MiningConstraints,
    Pattern,
    TemplateMetrics,
    aggregate,
    all_embeddings,
    covered,
    is_subsequence,
    leftmost_embedding,
    matching_ids,
    mine,
    mine_coverage,
    search_template,
    template_metrics,
)
from .model import (
    Classifier,
    IterationRecord,
    ModelLoop,
    ProjectionMap,
    TrainConfig,
    evaluate,
    feature_matrix,
    featurize,
    macro_f1,
    project,
    train,
)
from .service import SessionState, create_app, make_session
from .similarity import (
    RetrievalEntry,
    SimilarityWeights,
    retrieve,
    sim_e,
    sim_total,
    sim_v,
)
from .simulate import (
    SimulationConfig,
    SimulationResult,
    generate_synthetic,
    simulate,
)
from .types import (
    ClassInfo,
    Dataset,
    DatasetError,
    EventInstance,
    EventRegistry,
    EventSequence,
    EventType,
    SymbolString,
    symbol_string,
)

__version__ = "0.1.0"

__all__ = [
    "BandParams",
    "ClassInfo",
    "Classifier",
    "Cluster",
    "ClusterPartition",
    "Dataset",
    "DatasetError",
    "EditScript",
    "EventInstance",
    "EventRegistry",
    "EventSequence",
    "EventType",
    "IterationRecord",
    "LabelEvent",
    "LabelState",
    "LabelStore",
    "MiningConstraints",
    "ModelLoop",
    "Pattern",
    "ProjectionMap",
    "RetrievalEntry",
    "SessionState",
    "SimilarityWeights",
    "SimulationConfig",
    "SimulationResult",
    "SymbolString",
    "TemplateMetrics",
    "TrainConfig",
    "aggregate",
    "all_embeddings",
    "apply_edits",
    "assign_roles",
    "cluster",
    "covered",
    "create_app",
    "description_length",
    "edit_alignment",
    "edit_cost",
    "edit_distance",
    "evaluate",
    "feature_matrix",
    "featurize",
    "fold_events",
    "generate_synthetic",
    "ingest_dataset",
    "ingest_dir",
    "is_subsequence",
    "leftmost_embedding",
    "lsh_buckets",
    "macro_f1",
    "make_session",
    "matching_ids",
    "mine",
    "mine_coverage",
    "project",
    "read_labels",
    "read_projection",
    "retrieve",
    "search_template",
    "sim_e",
    "sim_total",
    "sim_v",
    "simulate",
    "symbol_string",
    "template_metrics",
    "train",
    "write_dataset",
    "write_labels",
    "write_projection",
]
