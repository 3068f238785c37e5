"""Command-line entry points for shom."""

__all__ = ["main"]
