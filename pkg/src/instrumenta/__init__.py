"""Monoid-based program instrumentation for verifying quantified and
aggregate array properties."""

__version__ = "0.1.0"
