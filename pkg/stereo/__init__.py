"""Siamese-CNN stereo matching with inner-product and learned correlation."""

__version__ = "0.1.0"
