"""Synthetic financial-statement panel with a planted ROI signal.

Features evolve as AR(1) processes per company, correlated within each
statement group through a shared group factor. ROI follows a random walk
whose yearly increment is driven by a sparse linear plus pairwise
interaction score on the planted features of the current year, so the
label of row (company, t) depends only on features observed at t.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from ..errors import ConfigError
from ..seeding import rng_for
from .panel import PanelDataset
from .schema import FeatureSchema, Group

NAMED_ITEMS: dict[Group, tuple[str, ...]] = {
    Group.FINANCIAL_PROFILE: (
        "operating_revenue", "ebitda", "net_profit", "total_assets_profile", "shareholders_funds",
        "employees", "cash_flow", "added_value", "net_financial_position", "ebitda_to_sales",
    ),
    Group.BALANCE_SHEET: (
        "total_assets", "current_assets", "inventories", "trade_receivables", "cash", "fixed_assets",
        "intangible_assets", "total_equity", "retained_earnings", "total_liabilities",
        "current_liabilities", "long_term_debt", "short_term_debt", "trade_payables", "provisions",
    ),
    Group.INCOME_STATEMENT: (
        "revenue", "cost_of_sales", "gross_profit", "personnel_costs", "depreciation",
        "operating_income", "interest_expense", "financial_income", "pre_tax_income", "taxes",
        "net_income", "dividends",
    ),
    Group.RATIO_ANALYSIS: (
        "roi", "roe", "ros", "rotation_of_capital", "debt_to_equity_reported", "current_ratio_reported",
        "liquidity_ratio", "coverage_of_fixed_assets", "leverage", "debt_to_ebitda",
    ),
}

_PREFIX = {
    Group.FINANCIAL_PROFILE: "fp",
    Group.BALANCE_SHEET: "bs",
    Group.INCOME_STATEMENT: "is",
    Group.RATIO_ANALYSIS: "ra",
}


@dataclass(frozen=True)
class SyntheticConfig:
    n_companies: int = 327
    first_year: int = 2013
    last_year: int = 2022
    group_sizes: tuple[int, int, int, int] = (30, 120, 80, 71)
    n_informative: int = 20
    n_interactions: int = 5
    # noise standard deviation relative to the standard deviation of the signal
    noise: float = 0.5
    linear_strength: float = 1.0
    interaction_strength: float = 1.0
    within_group_corr: float = 0.3
    persistence: float = 0.6
    missing_rate: float = 0.02
    informative_groups: tuple[str, ...] | None = None
    roi_feature: str = "roi"

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synthetic settings: {sorted(unknown)}")
        if "group_sizes" in d:
            d["group_sizes"] = tuple(int(g) for g in d["group_sizes"])
        if d.get("informative_groups") is not None:
            d["informative_groups"] = tuple(d["informative_groups"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["group_sizes"] = list(self.group_sizes)
        if self.informative_groups is not None:
            d["informative_groups"] = list(self.informative_groups)
        return d

    def validate(self) -> None:
        F = sum(self.group_sizes)
        if self.n_companies < 1:
            raise ConfigError("n_companies must be at least 1")
        if self.last_year <= self.first_year:
            raise ConfigError("need at least two years")
        if len(self.group_sizes) != 4 or min(self.group_sizes) < 0:
            raise ConfigError("group_sizes must be four non-negative counts")
        if self.group_sizes[3] < 1:
            raise ConfigError("the ratio-analysis group must hold at least the ROI feature")
        if self.n_informative > F:
            raise ConfigError(f"n_informative={self.n_informative} exceeds feature count {F}")
        if self.n_informative < 0 or self.noise < 0 or not 0 <= self.missing_rate < 1:
            raise ConfigError("n_informative, noise and missing_rate must be non-negative (missing_rate < 1)")
        if not (0 <= self.within_group_corr < 1 and 0 <= self.persistence < 1):
            raise ConfigError("within_group_corr and persistence must lie in [0, 1)")
        max_pairs = self.n_informative * (self.n_informative - 1) // 2
        if not 0 <= self.n_interactions <= max_pairs:
            raise ConfigError(f"n_interactions must lie in [0, {max_pairs}]")


@dataclass(frozen=True)
class SyntheticTruth:
    informative_features: tuple[int, ...]
    weights: np.ndarray
    interaction_pairs: tuple[tuple[int, int], ...]
    interaction_weights: np.ndarray
    bayes_auc: float
    noise_scale: float = field(default=0.0)

    def to_dict(self, schema: FeatureSchema | None = None) -> dict:
        d = {
            "informative_features": list(self.informative_features),
            "weights": self.weights.tolist(),
            "interaction_pairs": [list(p) for p in self.interaction_pairs],
            "interaction_weights": self.interaction_weights.tolist(),
            "bayes_auc": self.bayes_auc,
            "noise_scale": self.noise_scale,
        }
        if schema is not None:
            d["informative_names"] = [schema.names[i] for i in self.informative_features]
        return d

    def signal(self, X: np.ndarray) -> np.ndarray:
        s = X @ self.weights
        for (a, b), u in zip(self.interaction_pairs, self.interaction_weights):
            s = s + u * X[:, a] * X[:, b]
        return s


def synthetic_schema(group_sizes) -> FeatureSchema:
    blocks = []
    for group, size in zip(Group, group_sizes):
        named = list(NAMED_ITEMS[group][:size])
        named += [f"{_PREFIX[group]}_{k:03d}" for k in range(len(named), size)]
        blocks.append((group, named))
    return FeatureSchema.from_groups(blocks)


def _ar1(rng, shape, rho) -> np.ndarray:
    """AR(1) with unit stationary variance along axis 1."""
    out = np.empty(shape)
    out[:, 0] = rng.standard_normal((shape[0],) + shape[2:])
    scale = np.sqrt(1.0 - rho * rho)
    for t in range(1, shape[1]):
        out[:, t] = rho * out[:, t - 1] + scale * rng.standard_normal((shape[0],) + shape[2:])
    return out


def synthesize_panel(config: SyntheticConfig, seed: int) -> tuple[PanelDataset, SyntheticTruth]:
    config.validate()
    schema = synthetic_schema(config.group_sizes)
    F = len(schema)
    C = config.n_companies
    years = np.arange(config.first_year, config.last_year + 1)
    T = len(years)
    roi_pos = schema.index_of(config.roi_feature)
    group_idx = np.array([list(Group).index(g) for g in schema.groups])

    rng = rng_for(seed, "synthesize")
    factors = _ar1(rng, (C, T, 4), config.persistence)
    idio = _ar1(rng, (C, T, F), config.persistence)
    r = config.within_group_corr
    X = np.sqrt(r) * factors[:, :, group_idx] + np.sqrt(1.0 - r) * idio

    candidates = np.array([p for p in range(F) if p != roi_pos])
    if config.informative_groups is not None:
        allowed = {Group(g) for g in config.informative_groups}
        candidates = np.array([p for p in candidates if schema.features[p].group in allowed])
    if config.n_informative > len(candidates):
        raise ConfigError(f"only {len(candidates)} candidate positions for {config.n_informative} informative features")
    informative = np.sort(rng.choice(candidates, size=config.n_informative, replace=False))
    weights = np.zeros(F)
    signs = rng.choice([-1.0, 1.0], size=len(informative))
    weights[informative] = signs * rng.uniform(0.5, 1.5, size=len(informative)) * config.linear_strength
    all_pairs = list(combinations(informative.tolist(), 2))
    picked = rng.choice(len(all_pairs), size=config.n_interactions, replace=False) if all_pairs else []
    pairs = tuple(sorted(all_pairs[k] for k in picked))
    inter_w = rng.choice([-1.0, 1.0], size=len(pairs)) * rng.uniform(0.5, 1.0, size=len(pairs))
    inter_w = inter_w * config.interaction_strength

    truth = SyntheticTruth(tuple(int(i) for i in informative), weights, pairs, inter_w, float("nan"))
    flat = X.reshape(C * T, F)
    signal = truth.signal(flat).reshape(C, T)
    sd = float(signal[:, :-1].std())
    noise_scale = config.noise * sd
    increments = signal + noise_scale * rng.standard_normal((C, T))
    roi = np.empty((C, T))
    roi[:, 0] = rng.standard_normal(C)
    for t in range(1, T):
        roi[:, t] = roi[:, t - 1] + increments[:, t - 1]
    X[:, :, roi_pos] = roi

    missing = np.zeros((C, T, F), dtype=bool)
    if config.missing_rate > 0:
        maskable = np.ones(F, dtype=bool)
        maskable[informative] = False
        maskable[roi_pos] = False
        missing = (rng.random((C, T, F)) < config.missing_rate) & maskable
        X = np.where(missing, 0.0, X)

    labels = (roi[:, 1:] > roi[:, :-1]).ravel()
    scores = signal[:, :-1].ravel()
    bayes_auc = float("nan")
    if 0 < labels.sum() < labels.size:
        from ..metrics import roc_auc

        bayes_auc = roc_auc(labels.astype(np.int8), scores)
    truth = SyntheticTruth(truth.informative_features, weights, pairs, inter_w, bayes_auc, noise_scale)

    width = max(4, len(str(C)))
    company_ids = np.repeat(np.array([f"C{c + 1:0{width}d}" for c in range(C)], dtype=object), T)
    panel = PanelDataset(
        company_ids,
        np.tile(years, C).astype(np.int64),
        X.reshape(C * T, F),
        missing.reshape(C * T, F),
        schema,
    )
    return panel, truth
