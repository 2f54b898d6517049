"""MOOC dropout prediction toolkit."""

from ._core import (
    Course,
    DropoutlabError,
    Mlp,
    auc,
    build_matrix,
    cli,
    feature_names,
    load_course,
    run_experiment,
    score,
    sem,
    synthesize_corpus,
)

__all__ = [
    "Course",
    "DropoutlabError",
    "Mlp",
    "auc",
    "build_matrix",
    "cli",
    "feature_names",
    "load_course",
    "run_experiment",
    "score",
    "sem",
    "synthesize_corpus",
]

__version__ = "0.1.0"
