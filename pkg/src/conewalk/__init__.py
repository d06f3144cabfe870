"""Exit probabilities, Green functions and harmonic measure for the three-player gambler's ruin."""

__version__ = "0.1.0"
