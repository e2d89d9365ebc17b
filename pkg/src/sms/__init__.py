"""Spiking-network explicit time marching for ODEs and 1-D PDEs."""

__version__ = "0.1.0"
