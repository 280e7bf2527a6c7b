"""Controller synthesis from temporal-logic missions for grid-world robots."""
__version__ = "0.1.0"
