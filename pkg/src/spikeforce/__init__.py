"""Spiking-network decoders of finger force from motor-unit spike trains and iEMG."""
__version__ = "0.1.0"
