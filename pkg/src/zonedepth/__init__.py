"""Depth completion from an RGB image and a coarse multi-zone ToF sensor."""

__version__ = "0.1.0"
