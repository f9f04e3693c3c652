"""Base exception for the previz package."""


class PrevizError(Exception):
    """Root of all previz-specific errors."""
