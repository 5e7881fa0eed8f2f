"""Papilla segmentation, curvature and persistence features, and classifiers."""
__version__ = "0.1.0"
