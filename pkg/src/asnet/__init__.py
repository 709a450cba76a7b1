"""Multi-view single-object tracking with cross-view template sharing."""

__version__ = "0.1.0"
