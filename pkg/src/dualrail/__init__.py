"""Simulation and analysis toolkit for a dual-rail cavity erasure qubit."""

__version__ = "0.1.0"
