"""Constrained contextual linear bandits with anytime cumulative constraints."""

__version__ = "0.1.0"
