"""Markov-partition-free coding of hyperbolic toral automorphisms."""
__version__ = "0.1.0"
