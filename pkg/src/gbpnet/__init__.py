"""Generalized belief propagation for tensor-network contraction."""

__version__ = "0.1.0"
