"""Continuous-time STL motion planning for linear systems via mixed-integer programming."""

__version__ = "0.1.0"
