"""Dynamic per-beam power allocation for multibeam GEO satellites."""
__version__ = "0.1.0"
