"""Severity grading from lesion detection tables."""

import json

from ._core import (
    Config,
    DrgradeError,
    FeatureBuild,
    Fixture,
    Report,
    Table,
    accuracy,
    ablation,
    build_features,
    confusion_matrix,
    evaluate,
    gaussian_blur,
    load_fixture,
    preprocess,
    run_cli,
    synth,
)


def report_dict(report):
    """Parsed JSON form of an evaluate() or ablation() report."""
    return json.loads(report.json)


__all__ = [
    "Config",
    "DrgradeError",
    "FeatureBuild",
    "Fixture",
    "Report",
    "Table",
    "accuracy",
    "ablation",
    "build_features",
    "confusion_matrix",
    "evaluate",
    "gaussian_blur",
    "load_fixture",
    "preprocess",
    "report_dict",
    "run_cli",
    "synth",
]
