"""Best-approximation and best-proximity computations for cyclic maps between two sets."""

__version__ = "0.1.0"
