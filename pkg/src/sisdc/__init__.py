"""Semi-implicit spectral deferred correction for 1-D conservation laws."""

__version__ = "0.1.0"
