"""Sketch- and color-stroke-guided image synthesis workbench."""

__version__ = "0.1.0"
