"""Video-based finger-tapping analysis: signals, features, PCA, classifiers.

The pipeline turns 21-point hand-landmark recordings into a scaled
thumb-index distance signal, extracts 13 interpretable motor features
(hypokinesia, bradykinesia, combined speed, sequence effect,
hesitation-halts), analyzes their structure with PCA plus varimax
rotation, and trains multi-class or ordinal severity classifiers under
patient-grouped cross-validation.
"""

from .classify import (
    FittedModel,
    LopoResult,
    ModelSpec,
    NestedCVResult,
    Prediction,
    TrainingTable,
    grouped_kfold,
    load_model,
    lopo_evaluate,
    lopo_folds,
    nested_cv,
    ordinal_predict,
    permutation_importance,
    sample_hyperparams,
    save_model,
    train,
)
from .errors import (
    ConfigurationError,
    DegenerateCyclesError,
    DegenerateGeometryError,
    DegenerateTrainingError,
    InputError,
    InsufficientCyclesError,
    NoLabelError,
    ParseError,
    SchemaError,
    TaplabError,
    UndefinedAlphaError,
)
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    bradykinesia,
    combined_speed,
    extract_features,
    features_from_cycles,
    hesitation_halts,
    hypokinesia,
    sequence_effect,
)
from .ingest import (
    LandmarkFrame,
    Recording,
    ValidationReport,
    consensus_label,
    load_recording,
    parse_recording,
    save_recording,
    serialize_recording,
    validate_recording,
)
from .metrics import (
    MetricSet,
    baseline_metrics,
    compute_metrics,
    confidence_interval,
    krippendorff_alpha,
    wilcoxon_signed_rank,
)
from .pca import (
    FeatureTable,
    LoadingMatrix,
    principal_components,
    select_components,
    standardize,
    varimax,
    varimax_criterion,
)
from .signal import (
    CycleSeries,
    SpeedSignal,
    TapSignal,
    angle_signal,
    detect_cycles,
    distance_signal,
    speed_signal,
)
from .synth import (
    CycleTruth,
    SynthParams,
    generate_cohort,
    generate_landmarks,
    generate_signal,
    severity_profiles,
)

__version__ = "0.1.0"
