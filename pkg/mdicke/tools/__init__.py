"""File output helpers for the modified Dicke toolkit."""
