"""Dataset accounting and detection evaluation for physical-prototype images."""

from ._core import (
    ParseError,
    UndefinedValueError,
    ValidationError,
    accounting,
    canonicalize_manifest,
    epochs_from_steps,
    evaluate,
    generate_split,
    image_metrics,
    image_outcomes,
    iou,
    manifest_summary,
    normalized_to_manifest,
    run_cli,
    split_sizes,
    steps_from_epochs,
    steps_per_epoch,
)

__all__ = [
    "ParseError",
    "UndefinedValueError",
    "ValidationError",
    "accounting",
    "canonicalize_manifest",
    "epochs_from_steps",
    "evaluate",
    "generate_split",
    "image_metrics",
    "image_outcomes",
    "iou",
    "manifest_summary",
    "normalized_to_manifest",
    "run_cli",
    "split_sizes",
    "steps_from_epochs",
    "steps_per_epoch",
]
