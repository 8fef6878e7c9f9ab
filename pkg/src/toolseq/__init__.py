"""Tool-sequence mining and recommendation for agent workflows.

Mines a directed weighted tool-transition graph from successful agent
trajectories, retrieves candidate tools for a query with a hybrid
graph-semantic scorer, and orders them with learned or heuristic
rerankers.
"""

from .community import (
    Complementarity,
    Partition,
    UndirectedGraph,
    complementarity,
    louvain,
    modularity,
    nmi,
    purity,
    undirected_projection,
)
from .embeddings import (
    DEFAULT_DIMENSION,
    EmbeddingStore,
    ZeroVectorWarning,
    build_store,
    builtin_encode,
    load_embeddings,
    save_embeddings,
    semantic_similarity,
    top_k_semantic,
)
from .errors import (
    EmptyDataset,
    EmptyLibrary,
    FormatError,
    InsufficientData,
    IntegrityError,
    InvalidArgument,
    MissingEmbedding,
    MissingLabel,
    ParseError,
    ToolseqError,
)
from .graph import (
    TransitionGraph,
    build_graph,
    deserialize_graph,
    serialize_graph,
    transition_weight,
)
from .metrics import (
    AggregateReport,
    BootstrapResult,
    InstanceScore,
    aggregate,
    bootstrap_compare,
    oracle_k,
    score_instance,
)
from .pipeline import EvalArm, EvalRun, InstanceResult, evaluate_dataset, parse_k_mode
from .stage1 import CandidateSet, RetrievalConfig, gs_hybrid_retrieve, position_bonus
from .stage2 import (
    FEATURE_GROUPS,
    PairwiseModel,
    RankedSequence,
    TrainingConfig,
    apply_ablation,
    deserialize_model,
    extract_features,
    pairwise_predict,
    rerank_hybrid,
    rerank_lr,
    rerank_opt_perm,
    rerank_sem_sort,
    serialize_model,
    train,
)
from .synthetic import WorkflowSpec, basic_spec, generate, signal_gap_spec
from .trajectory import (
    Trajectory,
    TrajectoryDataset,
    dedup_first_occurrence,
    parse_trajectories,
    serialize_trajectories,
    split_train_validation,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "BootstrapResult",
    "CandidateSet",
    "Complementarity",
    "DEFAULT_DIMENSION",
    "EmbeddingStore",
    "EmptyDataset",
    "EmptyLibrary",
    "EvalArm",
    "EvalRun",
    "FEATURE_GROUPS",
    "FormatError",
    "InstanceResult",
    "InstanceScore",
    "InsufficientData",
    "IntegrityError",
    "InvalidArgument",
    "MissingEmbedding",
    "MissingLabel",
    "PairwiseModel",
    "ParseError",
    "Partition",
    "RankedSequence",
    "RetrievalConfig",
    "ToolseqError",
    "TrainingConfig",
    "Trajectory",
    "TrajectoryDataset",
    "TransitionGraph",
    "UndirectedGraph",
    "WorkflowSpec",
    "ZeroVectorWarning",
    "aggregate",
    "apply_ablation",
    "basic_spec",
    "bootstrap_compare",
    "build_graph",
    "build_store",
    "builtin_encode",
    "complementarity",
    "dedup_first_occurrence",
    "deserialize_graph",
    "deserialize_model",
    "evaluate_dataset",
    "extract_features",
    "generate",
    "gs_hybrid_retrieve",
    "load_embeddings",
    "louvain",
    "modularity",
    "nmi",
    "oracle_k",
    "pairwise_predict",
    "parse_k_mode",
    "parse_trajectories",
    "position_bonus",
    "purity",
    "rerank_hybrid",
    "rerank_lr",
    "rerank_opt_perm",
    "rerank_sem_sort",
    "save_embeddings",
    "score_instance",
    "semantic_similarity",
    "serialize_graph",
    "serialize_model",
    "serialize_trajectories",
    "split_train_validation",
    "top_k_semantic",
    "train",
    "transition_weight",
    "undirected_projection",
]
