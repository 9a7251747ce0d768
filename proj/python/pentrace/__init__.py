"""Smart-pen handwriting pipeline: indicators, age-group classifiers and Shapley explanations."""

from ._core import (
    PentraceError,
    __version__,
    dataset,
    explain,
    explain_model,
    extract,
    extract_features,
    generate_subject,
    indicator_names,
    load_recording,
    metrics_from_confusion,
    report,
    roc_auc,
    run_all,
    shapley,
    synth,
    train_eval,
)

__all__ = [
    "PentraceError",
    "__version__",
    "dataset",
    "explain",
    "explain_model",
    "extract",
    "extract_features",
    "generate_subject",
    "indicator_names",
    "load_recording",
    "metrics_from_confusion",
    "report",
    "roc_auc",
    "run_all",
    "shapley",
    "synth",
    "train_eval",
]
