"""Numerical laboratory for the damped wave equation on the 2-torus with x-invariant damping."""

__version__ = "0.1.0"
