"""App package for the binaq command-line interface."""
