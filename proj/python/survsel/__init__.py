"""Competing-risks survival analysis with discrete-time neural models.

The package wraps the C++ core: synthetic data generation, filter-based
feature ranking, time-dependent concordance, trained-model inference, and
the cross-validated experiment harness driven by JSON manifests.
"""

from ._core import (
    DataError,
    Dataset,
    Model,
    NormalizationParams,
    NumericError,
    apply_normalization,
    augment_synthetic,
    c_index,
    generate_toy,
    load_model,
    normalize,
    rank_features,
    run_experiment,
    run_experiment_file,
    time_fixed_labels,
)

__all__ = [
    "DataError",
    "Dataset",
    "Model",
    "NormalizationParams",
    "NumericError",
    "apply_normalization",
    "augment_synthetic",
    "c_index",
    "generate_toy",
    "load_model",
    "normalize",
    "rank_features",
    "run_experiment",
    "run_experiment_file",
    "time_fixed_labels",
]
