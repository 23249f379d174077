"""Zero-temperature 2D random-field Ising laboratory."""
__version__ = "0.1.0"
