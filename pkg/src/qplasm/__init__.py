"""Plasmonic transducer models and quantum-metrology precision bounds."""

__version__ = "0.1.0"
