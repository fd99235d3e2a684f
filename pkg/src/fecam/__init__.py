"""Training-free continual-learning classification over frozen embeddings.

Each class is modeled as a multivariate Gaussian over embedding vectors
and queries are assigned by squared Mahalanobis distance to class
prototypes, with covariance shrinkage, correlation normalization, and an
optional power transform conditioning the estimates. Models absorb tasks
incrementally without storing raw samples.
"""

from fecam.baseline import (
    LinearClassifier,
    predict_linear,
    sample_from_gaussians,
    train_linear,
)
from fecam.classifier import (
    ClassModel,
    FeCAMConfig,
    FeCAMModel,
    Mode,
    Prediction,
    StorageReport,
    TransformOrder,
    fit_task,
    from_parameters,
    model_storage_report,
    predict,
    predict_euclidean,
    predict_labels,
)
from fecam.covariance import (
    CovarianceMatrix,
    DiagonalModel,
    PrecisionMatrix,
    Stage,
    average_domain,
    estimate_covariance,
    invert_spd,
    merge_common,
    normalize_correlation,
    normalize_diagonal,
    shrink,
    squared_mahalanobis,
)
from fecam.embeddings import read_embeddings, write_embeddings, write_embeddings_csv
from fecam.errors import (
    ConditioningError,
    DataError,
    FecamError,
    FormatError,
    ProtocolError,
    StageError,
    TrainingError,
)
from fecam.harness import (
    CovSpec,
    EvalReport,
    ProtocolConfig,
    ProtocolKind,
    SynthSpec,
    TaskStream,
    TrueParams,
    bayes_oracle,
    build_splits,
    run_protocol,
    singular_value_profile,
    synth_generate,
)
from fecam.model_io import load_model, save_model
from fecam.transform import NegativePolicy, TukeyConfig, tukey

__version__ = "0.1.0"
