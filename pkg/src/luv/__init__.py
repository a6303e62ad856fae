"""Paired-lighting capture and UV-fluorescence label extraction toolkit."""

__version__ = "0.1.0"
