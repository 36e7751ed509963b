"""Spatial Sigma-Delta modulator design and verification for quantized massive-MIMO downlink."""

__version__ = "0.1.0"
