"""Two-type competition on Z^d driven by branching random walks."""

__version__ = "0.1.0"
