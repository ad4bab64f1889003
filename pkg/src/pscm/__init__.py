"""Probabilistically shaped QAM link simulation."""

__version__ = "0.1.0"
