"""Simulation of a hierarchical automated vehicle that stands in for an accompanying person."""

__version__ = "0.1.0"
