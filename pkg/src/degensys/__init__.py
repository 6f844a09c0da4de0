"""Coupled degenerate elliptic system: solver, approximation ladder and estimate audits."""

__version__ = "0.1.0"
