"""Slotted-TTI simulator and kernel library for massive machine-type random access."""

__version__ = "0.1.0"
