"""Concept-drift adaptation for CFG-based malware classifiers."""
__version__ = "0.1.0"
