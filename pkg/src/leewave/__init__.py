"""Linear mountain lee waves by spectral transform."""

__version__ = "0.1.0"
