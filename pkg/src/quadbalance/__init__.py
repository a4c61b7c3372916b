"""Momentum-based two-point balance control and line walking for a quadruped."""

__version__ = "0.1.0"
