"""Homophily analysis, social graph rewiring and contrastive augmentation for social recommenders."""

__version__ = "0.1.0"
