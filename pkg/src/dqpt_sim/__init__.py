"""Simulation of dynamical quantum phase transitions in NV-centre nuclear spin registers."""

__version__ = "0.1.0"
