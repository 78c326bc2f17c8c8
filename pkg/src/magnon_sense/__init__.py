"""Simulation and analysis toolkit for single-magnon sensing with a central electron spin."""

__version__ = "0.1.0"
