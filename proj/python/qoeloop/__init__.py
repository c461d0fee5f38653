"""Bitrate planning, playback simulation and closed-loop QoE weight learning."""

from ._core import (
    Error,
    FeedbackDataset,
    FormatError,
    InfeasibleError,
    LearnerConfig,
    RefusalError,
    SessionConfig,
    ThroughputTrace,
    ValidationError,
    build_dataset,
    classify,
    evaluate_mos,
    format_trace_csv,
    generate_trace,
    ideal_weights,
    mean_square_variation,
    online_learner_config,
    parse_trace_csv,
    plan,
    qoe_score,
    run_loop,
    simulate,
    train,
)

__all__ = [
    "Error",
    "FeedbackDataset",
    "FormatError",
    "InfeasibleError",
    "LearnerConfig",
    "RefusalError",
    "SessionConfig",
    "ThroughputTrace",
    "ValidationError",
    "build_dataset",
    "classify",
    "evaluate_mos",
    "format_trace_csv",
    "generate_trace",
    "ideal_weights",
    "mean_square_variation",
    "online_learner_config",
    "parse_trace_csv",
    "plan",
    "qoe_score",
    "run_loop",
    "simulate",
    "train",
]
