"""Cooperative-feedback precoding and interference power control for the
two-user MIMO interference channel."""

__version__ = "0.1.0"
