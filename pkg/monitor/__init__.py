"""Monitoring and logging package for the document binarization evaluation toolkit."""
