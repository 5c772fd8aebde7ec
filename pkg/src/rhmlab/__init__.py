"""Random Hierarchy Model laboratory."""

__version__ = "0.1.0"
