"""Round-robin quantum secret sharing: key rates, optimization, simulation."""

__version__ = "0.1.0"
