"""Cooperative games over features and their Shapley values."""

from .coalition import Coalition, Partition, all_masks
from .estimators import (
    EXACT_CAP,
    ShapleyMethod,
    ShapleyResult,
    exact_shapley,
    kernel_design,
    kernel_shap,
    partition_shapley,
    sampled_shapley,
    shapley_from_table,
    shapley_weights,
)
from .games import (
    BASELINES,
    CoalitionGame,
    FunctionGame,
    MaskedModel,
    MaskingGame,
    QuotientGame,
    TableGame,
    masking_game,
    masking_games,
    sample_background,
)

__all__ = [
    "BASELINES",
    "EXACT_CAP",
    "Coalition",
    "CoalitionGame",
    "FunctionGame",
    "MaskedModel",
    "MaskingGame",
    "Partition",
    "QuotientGame",
    "ShapleyMethod",
    "ShapleyResult",
    "TableGame",
    "all_masks",
    "exact_shapley",
    "kernel_design",
    "kernel_shap",
    "masking_game",
    "masking_games",
    "partition_shapley",
    "sample_background",
    "sampled_shapley",
    "shapley_from_table",
    "shapley_weights",
]
