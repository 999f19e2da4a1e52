"""Blur-synthesis, evaluation and reference-kernel toolkit for RGB-D video deblurring data."""

__version__ = "0.1.0"
