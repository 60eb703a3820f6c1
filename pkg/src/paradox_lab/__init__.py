"""Simulator for mesoscopic and macroscopic three-box paradoxes."""

__version__ = "0.1.0"
