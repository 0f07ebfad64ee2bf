"""Per-point membership-inference auditing with bagged reference models.

Allocate every point to a fixed number of reference models, train the
models, and fit one small attack model per point on its own confidence
fibres. A half-split target protocol then measures, point by point, how
often the attack calls membership correctly, against a per-class baseline
and the binomial coin-flip floor.
"""

from .allocator import (
    REFERENCE,
    TARGET,
    AllocationPlan,
    allocate_reference,
    allocate_target_halves,
    load_plan,
    save_plan,
    training_indices,
)
from .attacks import (
    ClassAttackModel,
    ClassAttackScorer,
    LogRegConfig,
    PointAttackModel,
    PointAttackScorer,
    attack_decision,
    fit_weighted_logreg,
    load_class_attacks,
    load_point_attacks,
    save_class_attacks,
    save_point_attacks,
    train_class_attacks,
    train_point_attacks,
)
from .dataset import LabeledDataset, load_csv, subset, synth_gaussian_mixture, write_csv
from .errors import (
    ArgumentError,
    ConfigValidationError,
    DataFormatError,
    DegenerateLabelsError,
    NumericError,
)
from .evaluation import (
    CoinFlipScorer,
    ConstantScorer,
    EvaluationReport,
    OracleScorer,
    PerPointOutcome,
    RandomGuessSummary,
    binomial_tail,
    jaccard,
    load_report,
    random_guess_simulation,
    roc_auc,
    run_attack_validation,
    threshold_counts,
    write_report,
)
from .farm import (
    ConfidenceTensor,
    ModelSet,
    extract_confidence_tensor,
    load_tensor,
    save_tensor,
    train_model_set,
)
from .figures import save_histogram_figure, save_threshold_figure
from .modelkit import (
    Classifier,
    ModelSpec,
    load_classifier,
    predict_confidences,
    save_classifier,
    task_accuracy,
    train_classifier,
)
from .pipeline import (
    CsvSource,
    ExperimentConfig,
    Pipeline,
    ReferenceConfig,
    SyntheticSource,
    TargetConfig,
    compare_attacks,
    load_config,
    parse_config,
    run_pipeline,
)
from .seeding import derive_seed, mix_seed

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "ArgumentError",
    "ClassAttackModel",
    "ClassAttackScorer",
    "Classifier",
    "CoinFlipScorer",
    "ConfidenceTensor",
    "ConfigValidationError",
    "ConstantScorer",
    "CsvSource",
    "DataFormatError",
    "DegenerateLabelsError",
    "EvaluationReport",
    "ExperimentConfig",
    "LabeledDataset",
    "LogRegConfig",
    "ModelSet",
    "ModelSpec",
    "NumericError",
    "OracleScorer",
    "PerPointOutcome",
    "Pipeline",
    "PointAttackModel",
    "PointAttackScorer",
    "RandomGuessSummary",
    "REFERENCE",
    "ReferenceConfig",
    "SyntheticSource",
    "TARGET",
    "TargetConfig",
    "allocate_reference",
    "allocate_target_halves",
    "attack_decision",
    "binomial_tail",
    "compare_attacks",
    "derive_seed",
    "extract_confidence_tensor",
    "fit_weighted_logreg",
    "jaccard",
    "load_class_attacks",
    "load_classifier",
    "load_config",
    "load_csv",
    "load_plan",
    "load_point_attacks",
    "load_report",
    "load_tensor",
    "mix_seed",
    "parse_config",
    "predict_confidences",
    "random_guess_simulation",
    "roc_auc",
    "run_attack_validation",
    "run_pipeline",
    "save_class_attacks",
    "save_classifier",
    "save_histogram_figure",
    "save_plan",
    "save_point_attacks",
    "save_tensor",
    "save_threshold_figure",
    "subset",
    "synth_gaussian_mixture",
    "task_accuracy",
    "threshold_counts",
    "train_class_attacks",
    "train_classifier",
    "train_model_set",
    "train_point_attacks",
    "training_indices",
    "write_csv",
    "write_report",
]
