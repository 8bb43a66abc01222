"""Drop-off pricing for floating car-sharing: prices, best-response
dynamics and social-optimum search on convex polygonal regions."""

__version__ = "0.1.0"
