"""Travelling electromagnetic waves in nonlinear cylindrically symmetric media.

Discrete curl-curl operators and Helmholtz splitting, N-function tools,
SO(2) symmetry reductions, a shooting solver for nodal TE profiles, a
variational solver for TM profiles, and field/energy synthesis.
"""
from .errors import ConfigError, DomainError, NumericError, SearchError, ShapeError, TravelWaveError
from .grid import Grid2D, RadialProfile

__version__ = "0.1.0"

__all__ = ["Grid2D", "RadialProfile", "TravelWaveError", "ConfigError", "DomainError", "ShapeError",
           "NumericError", "SearchError", "__version__"]
