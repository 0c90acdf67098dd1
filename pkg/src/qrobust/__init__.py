"""Robustness certification for binary quantum classifiers."""

__version__ = "0.1.0"
