"""Weighted-indexed semi-Markov chain models of high-frequency traded volume."""

__version__ = "0.1.0"
