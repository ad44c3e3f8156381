"""Surrogate-model based hyperparameter tuning."""

import json

from ._spotune import (
    ConfigError,
    DataError,
    DecodeError,
    FitError,
    Kriging,
    SearchSpace,
    UnsupportedError,
    __version__,
    cli,
    difficulty_level,
    kemeny_consensus,
    kendall_tau,
    preset,
    rank_frequencies,
    ranks_from_losses,
    sample_overlap,
    tune,
)


def space(params):
    """Build a SearchSpace from a list of parameter dicts (config-file format)."""
    return SearchSpace(json.dumps(params))


__all__ = [
    "ConfigError",
    "DataError",
    "DecodeError",
    "FitError",
    "Kriging",
    "SearchSpace",
    "UnsupportedError",
    "__version__",
    "cli",
    "difficulty_level",
    "kemeny_consensus",
    "kendall_tau",
    "preset",
    "rank_frequencies",
    "ranks_from_losses",
    "sample_overlap",
    "space",
    "tune",
]
