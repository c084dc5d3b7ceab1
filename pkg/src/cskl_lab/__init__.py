"""Classical-lessor secure key leasing built on the compiled magic square game."""

__version__ = "0.1.0"
