"""Simulation and statistical verification of set-indexed Brownian motion
on rectangles of the positive quadrant."""

__version__ = "0.1.0"
