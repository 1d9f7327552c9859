"""Federated training of neural reduced-order models and autoencoders."""

__version__ = "0.1.0"
