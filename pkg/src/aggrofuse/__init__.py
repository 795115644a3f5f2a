"""Multimodal anger detection: tracked-point features, behavioral rules, per-modality
SVMs and decision-level fusion, with a seeded synthetic data generator."""

__version__ = "0.1.0"
