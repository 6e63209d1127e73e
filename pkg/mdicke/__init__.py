"""mdicke - exact ground states of the modified Dicke model in an extended coherent-state basis."""

__version__ = "0.1.0"
