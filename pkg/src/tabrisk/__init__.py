"""Tabular risk-modeling workbench: benchmark data, augmentation,
from-scratch MLP ensembles, evaluation and case-level explanations."""

__version__ = "0.1.0"
