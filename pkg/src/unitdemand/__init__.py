"""Bundle pricing for unit-demand buyers with independent item values."""

__version__ = "0.1.0"
