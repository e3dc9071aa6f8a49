"""Fractional perimeters and codimensions on discretized metric measure spaces."""

__version__ = "0.1.0"
