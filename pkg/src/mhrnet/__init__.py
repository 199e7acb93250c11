"""Memristive diffusive Hindmarsh-Rose network simulator."""

__version__ = "0.1.0"
