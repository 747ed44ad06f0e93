"""Representation learning and forecast verification for gridded raster time series."""

__version__ = "0.1.0"
