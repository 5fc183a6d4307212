"""Longhand-division demonstrations on a grid environment, and an
environment-forced evaluation harness for autoregressive generators."""

__version__ = "0.1.0"
