"""Adversarial attacks on skeletal-motion action classifiers."""

__version__ = "0.4.0"
