from .panel import (
    LabelDiagnostics,
    LabeledDataset,
    PanelDataset,
    YearSplit,
    build_labels,
    load_panel,
    split_by_year,
    write_panel,
)
from .ratios import ZERO_DENOMINATOR, Ratio, RatioSpec, compute_ratios
from .schema import GROUP_ORDER, Feature, FeatureSchema, Group
from .synthetic import SyntheticConfig, SyntheticTruth, synthesize_panel, synthetic_schema

__all__ = [
    "Feature", "FeatureSchema", "Group", "GROUP_ORDER",
    "PanelDataset", "LabeledDataset", "LabelDiagnostics", "YearSplit",
    "load_panel", "write_panel", "build_labels", "split_by_year",
    "Ratio", "RatioSpec", "compute_ratios", "ZERO_DENOMINATOR",
    "SyntheticConfig", "SyntheticTruth", "synthesize_panel", "synthetic_schema",
]
