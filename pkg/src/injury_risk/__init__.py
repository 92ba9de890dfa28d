"""Workplace injury risk modelling for imbalanced data: boosted trees, resampling
ensembles, instance-weighted transfer between organizations, cost curves,
profit thresholds and tree explanations."""

__version__ = "0.1.0"
