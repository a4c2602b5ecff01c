"""Constant-modulus joint radar-communication waveforms."""

__version__ = "0.1.0"
