"""Neural networks whose first layer is a trainable complex Morlet transform."""

__version__ = "0.1.0"
