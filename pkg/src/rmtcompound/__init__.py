"""Compound random-matrix model of non-stationary multivariate returns."""

__version__ = "0.1.0"

from .errors import RMTError  # noqa: E402,F401
from .kernels import BACKEND  # noqa: E402,F401
