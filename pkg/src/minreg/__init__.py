"""Minimal invariant and attracting regions of two-reaction variable-rate mass-action systems."""
__version__ = "0.1.0"
