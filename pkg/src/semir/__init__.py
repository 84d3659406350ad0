"""Multi-perspective semantic information retrieval engine."""

__version__ = "0.1.0"
