"""Cross-lingual teacher-student distillation of sentence encoders.

Pipeline commands (``prepare``, ``pretrain_teacher``, ``train``, ``evaluate``,
``viz``) take a :class:`RunConfig` from :func:`load_config`. The loss and
metric functions work on NumPy arrays.
"""

from ._mmkd import (
    ConfigError,
    DataError,
    NumericError,
    RunConfig,
    cluster_stats,
    evaluate,
    generate_synthetic,
    load_config,
    lr_at_step,
    parse_config,
    prepare,
    pretrain_teacher,
    project_2d,
    retrieval_accuracy,
    senta_loss,
    struca_loss,
    tokenize,
    train,
    viz,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "RunConfig",
    "cluster_stats",
    "evaluate",
    "generate_synthetic",
    "load_config",
    "lr_at_step",
    "parse_config",
    "prepare",
    "pretrain_teacher",
    "project_2d",
    "retrieval_accuracy",
    "senta_loss",
    "struca_loss",
    "tokenize",
    "train",
    "viz",
]
