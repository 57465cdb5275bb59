"""Novel class discovery with equidistant-anchor spacing regularization."""

__version__ = "0.1.0"

from .data import (
    UNLABELED,
    Dataset,
    EvaluationSidecar,
    LabeledView,
    SplitSpec,
    UnlabeledView,
    augment,
    generate_mixture,
    load_csv,
    load_points_csv,
    load_sidecar,
    save_csv,
    save_points_csv,
    save_sidecar,
    split,
)
from .estimators import EquidistantAnchors, SpacingDiscoverer
from .exceptions import (
    ConfigError,
    DegeneratePrototypesError,
    DimensionMismatchError,
    InvalidAlphaError,
    InvalidLabelError,
    LengthMismatchError,
    MissingSidecarError,
    NonFiniteLossError,
    ParseError,
    SchemaError,
    SeparationInfeasibleError,
    SpacingNCDError,
    StaleCacheError,
    TooFewSamplesError,
    UnsupportedWeightsError,
    ZeroLatentError,
)
from .geometry import (
    DissimilarityMatrix,
    SolverResult,
    SolverSettings,
    b_matrix,
    build_dissimilarity,
    get_equidistant_points,
    majorization_step,
    pairwise_distances,
    stress,
    unit_weights,
)
from .losses import (
    LossValue,
    consistency,
    cross_entropy,
    pairwise_pseudo,
    spacing_mse,
)
from .metrics import (
    ClusteringReport,
    clustering_accuracy,
    evaluate_clustering,
    kmeans_infer,
    nmi,
    report_to_json,
)
from .model import (
    ClassifierHead,
    FeatureExtractor,
    ForwardCache,
    GradientSet,
    HeadCache,
    HeadGradients,
    ModelBundle,
    backward,
    embed,
    forward,
    head_backward,
    head_forward,
    head_probabilities,
    head_sgd_step,
    init_extractor,
    init_head,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
)
from .prototypes import (
    TRANSPORT_MODES,
    PrototypeState,
    assign_nearest,
    fresh_state,
    init_prototypes,
    update_prototypes,
)
from .training import (
    EpochRecord,
    TrainingConfig,
    TrainingTrace,
    learning_with_spacing,
    trace_to_jsonl,
    train_single_stage,
    train_two_stage,
)

__all__ = [
    "__version__",
    "UNLABELED",
    "TRANSPORT_MODES",
    "ClassifierHead",
    "ClusteringReport",
    "ConfigError",
    "Dataset",
    "DegeneratePrototypesError",
    "DimensionMismatchError",
    "DissimilarityMatrix",
    "EpochRecord",
    "EquidistantAnchors",
    "EvaluationSidecar",
    "FeatureExtractor",
    "ForwardCache",
    "GradientSet",
    "HeadCache",
    "HeadGradients",
    "InvalidAlphaError",
    "InvalidLabelError",
    "LabeledView",
    "LengthMismatchError",
    "LossValue",
    "MissingSidecarError",
    "ModelBundle",
    "NonFiniteLossError",
    "ParseError",
    "PrototypeState",
    "SchemaError",
    "SeparationInfeasibleError",
    "SolverResult",
    "SolverSettings",
    "SpacingDiscoverer",
    "SpacingNCDError",
    "SplitSpec",
    "StaleCacheError",
    "TooFewSamplesError",
    "TrainingConfig",
    "TrainingTrace",
    "UnlabeledView",
    "UnsupportedWeightsError",
    "ZeroLatentError",
    "assign_nearest",
    "augment",
    "b_matrix",
    "backward",
    "build_dissimilarity",
    "clustering_accuracy",
    "consistency",
    "cross_entropy",
    "embed",
    "evaluate_clustering",
    "forward",
    "fresh_state",
    "generate_mixture",
    "get_equidistant_points",
    "head_backward",
    "head_forward",
    "head_probabilities",
    "head_sgd_step",
    "init_extractor",
    "init_head",
    "init_prototypes",
    "kmeans_infer",
    "learning_with_spacing",
    "load_checkpoint",
    "load_csv",
    "load_points_csv",
    "load_sidecar",
    "majorization_step",
    "nmi",
    "pairwise_distances",
    "pairwise_pseudo",
    "report_to_json",
    "save_checkpoint",
    "save_csv",
    "save_points_csv",
    "save_sidecar",
    "sgd_step",
    "spacing_mse",
    "split",
    "stress",
    "trace_to_jsonl",
    "train_single_stage",
    "train_two_stage",
    "unit_weights",
    "update_prototypes",
]
