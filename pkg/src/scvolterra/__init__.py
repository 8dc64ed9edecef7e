"""Joint graph and order-2 simplicial complex inference with graph Volterra models."""

__version__ = "0.1.0"
