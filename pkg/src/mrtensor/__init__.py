"""Weighted low-rank factorization of sparse multi-relational tensors.

Learns per-object latent factors shared across relations, per-relation
interaction matrices, and biases by L-BFGS minimization of a weighted,
per-slice-modular loss. Only stored (nonzero-weight) entries are ever
touched by the objective, so training cost scales with the observations
rather than with the full tensor.
"""

from .errors import (
    DegenerateSplitError,
    FormatError,
    MrTensorError,
    NumericalError,
    UndefinedMetricError,
    ValidationError,
)
from .evaluation import (
    EvalReport,
    auprc,
    benchmark,
    evaluate_model,
    grid_search,
    merge_tensors,
    mse,
    selection_score,
    time_per_evaluation,
)
from .losses import LossAssignment, logistic, quadratic, smooth_hinge
from .model import (
    FactorModel,
    load_model,
    predict_label,
    predict_score,
    read_model,
    save_model,
    write_model,
)
from .objective import (
    ObjectiveState,
    ParamLayout,
    dense_oracle_evaluate,
    evaluate,
    evaluate_flat,
    flatten_model,
    model_from_flat,
)
from .optimizer import FitConfig, FitTrace, eigen_init, fit, random_init
from .synthgen import SynthConfig, generate
from .tensor_data import (
    ObservedTensor,
    SplitSpec,
    apply_class_reweighting,
    parse_tensor,
    read_tensor,
    split,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateSplitError",
    "EvalReport",
    "FactorModel",
    "FitConfig",
    "FitTrace",
    "FormatError",
    "LossAssignment",
    "MrTensorError",
    "NumericalError",
    "ObjectiveState",
    "ObservedTensor",
    "ParamLayout",
    "SplitSpec",
    "SynthConfig",
    "UndefinedMetricError",
    "ValidationError",
    "apply_class_reweighting",
    "auprc",
    "benchmark",
    "dense_oracle_evaluate",
    "eigen_init",
    "evaluate",
    "evaluate_flat",
    "evaluate_model",
    "fit",
    "flatten_model",
    "generate",
    "grid_search",
    "load_model",
    "logistic",
    "merge_tensors",
    "model_from_flat",
    "mse",
    "parse_tensor",
    "predict_label",
    "predict_score",
    "quadratic",
    "random_init",
    "read_model",
    "read_tensor",
    "save_model",
    "selection_score",
    "smooth_hinge",
    "split",
    "time_per_evaluation",
    "write_model",
]
