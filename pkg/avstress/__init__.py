"""Adaptive stress testing of an autonomous vehicle at a pedestrian crosswalk."""

from .version import __version__

__all__ = ["__version__"]
