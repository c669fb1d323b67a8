"""Simulated tactile mobile manipulators that cooperatively lift a box."""

__version__ = "0.1.0"
