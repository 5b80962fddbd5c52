"""Modular swap-test quantum neural networks: exact simulation, lossy shot sampling, and the equivalent classical network."""

__version__ = "0.1.0"
