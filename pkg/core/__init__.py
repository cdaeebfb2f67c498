"""Core modules of the binaq document binarization evaluation toolkit."""

__version__ = "0.3.0"
