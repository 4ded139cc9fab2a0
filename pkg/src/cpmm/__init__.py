"""Countable piecewise monotone Markov maps and their transition matrices."""

__version__ = "0.1.0"
