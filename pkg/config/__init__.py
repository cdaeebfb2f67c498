"""Configuration package for the document binarization evaluation toolkit."""
