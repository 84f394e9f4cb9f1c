"""Emitter (modulation) classification with LDA projection and neighborhood-rough-set feature reduction."""

__version__ = "0.1.0"
