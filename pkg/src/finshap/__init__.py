"""Shapley-value attribution for profitability-direction classifiers."""

__version__ = "0.1.0"
