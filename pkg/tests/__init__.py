"""Test package for the binaq binarization toolkit."""
