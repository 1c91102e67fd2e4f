"""Music-conditioned 3D dance generation with a full-attention cross-modal transformer."""

__version__ = "0.1.0"
