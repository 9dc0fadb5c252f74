"""Pseudo-spectral laboratory for the white-noise-forced MHD system on T^3."""

from pmhd.grid import SpectralField, TorusGrid

__all__ = ["SpectralField", "TorusGrid"]
__version__ = "0.1.0"
