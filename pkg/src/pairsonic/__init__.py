"""Secure group exchange of contact cards, verified over an acoustic channel."""

__version__ = "0.1.0"
