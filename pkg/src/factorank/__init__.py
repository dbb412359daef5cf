"""Moment-based lower bounds for factorization ranks of matrices."""
__version__ = "0.1.0"
