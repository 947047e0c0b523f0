"""Semantic embeddings of mathematical expressions from equivalent-expression pairs."""

__version__ = "0.1.0"
