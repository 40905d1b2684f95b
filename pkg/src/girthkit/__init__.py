"""girthkit: multi-view 3D body scanning, calibration and girth measurement."""

__version__ = "0.1.0"
